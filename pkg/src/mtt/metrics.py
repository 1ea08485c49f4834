"""CLEAR-MOT and identity (IDF1) metrics with IoU matching."""

from __future__ import annotations

import json
from collections import defaultdict
from collections.abc import Mapping
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .cluster import iou_matrix

# frame -> {object id -> box}
FrameTable = dict[int, dict[int, tuple]]


@dataclass(frozen=True)
class EvalReport:
    MOTA: float
    IDF1: float
    IDP: float
    IDR: float
    Recall: float
    Precision: float
    FP: int
    FN: int
    IDs: int
    MT: int
    PT: int
    ML: int
    GT_count: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    def to_table(self) -> str:
        items = asdict(self)
        head = " ".join(f"{k:>9}" for k in items)
        vals = " ".join(f"{v:>9.4f}" if isinstance(v, float) else f"{v:>9d}" for v in items.values())
        return head + "\n" + vals + "\n"


def frame_table(tracks) -> FrameTable:
    """Accept a list of FinalTrack, a SceneTruth-like object or a FrameTable."""
    if hasattr(tracks, "tracks"):
        tracks = tracks.tracks()
    if isinstance(tracks, Mapping):
        return {int(f): dict(objs) for f, objs in tracks.items()}
    table: FrameTable = defaultdict(dict)
    for tr in tracks:
        for f, box in tr.boxes.items():
            table[f][tr.track_id] = box
    return dict(table)


def _assign(iou: np.ndarray, iou_min: float) -> list[tuple[int, int]]:
    if iou.size == 0:
        return []
    # pairs below the threshold may not be matched
    weight = np.where(iou >= iou_min, iou, 0.0)
    rows, cols = linear_sum_assignment(-weight)
    return [(int(r), int(c)) for r, c in zip(rows, cols) if iou[r, c] >= iou_min]


def match_frame(
    gt_boxes: Mapping[int, tuple],
    pred_boxes: Mapping[int, tuple],
    iou_min: float = 0.5,
    previous: Mapping[int, int] | None = None,
) -> dict[int, int]:
    """One-to-one GT id -> predicted id matching for one frame.

    Matches from ``previous`` that still reach ``iou_min`` are kept; the rest
    are assigned to maximise the total IoU.
    """
    matches: dict[int, int] = {}
    previous = previous or {}
    for g, p in sorted(previous.items()):
        if g in gt_boxes and p in pred_boxes:
            if iou_matrix(np.array([gt_boxes[g]]), np.array([pred_boxes[p]]))[0, 0] >= iou_min:
                matches[g] = p
    used = set(matches.values())
    g_ids = sorted(g for g in gt_boxes if g not in matches)
    p_ids = sorted(p for p in pred_boxes if p not in used)
    if g_ids and p_ids:
        iou = iou_matrix(np.array([gt_boxes[g] for g in g_ids]), np.array([pred_boxes[p] for p in p_ids]))
        for r, c in _assign(iou, iou_min):
            matches[g_ids[r]] = p_ids[c]
    return matches


def idf1(gt, preds, iou_min: float = 0.5) -> tuple[float, float, float]:
    """Global trajectory matching; returns (IDF1, IDP, IDR)."""
    gt_t, pr_t = frame_table(gt), frame_table(preds)
    gt_ids = sorted({g for objs in gt_t.values() for g in objs})
    pr_ids = sorted({p for objs in pr_t.values() for p in objs})
    n_gt = sum(len(o) for o in gt_t.values())
    n_pr = sum(len(o) for o in pr_t.values())
    if not gt_ids or not pr_ids:
        return 0.0, 0.0, 0.0
    gi = {g: i for i, g in enumerate(gt_ids)}
    pi = {p: i for i, p in enumerate(pr_ids)}
    overlap = np.zeros((len(gt_ids), len(pr_ids)))
    for f, gobjs in gt_t.items():
        pobjs = pr_t.get(f, {})
        if not pobjs:
            continue
        gk, pk = list(gobjs), list(pobjs)
        iou = iou_matrix(np.array([gobjs[g] for g in gk]), np.array([pobjs[p] for p in pk]))
        for r, c in zip(*np.nonzero(iou >= iou_min)):
            overlap[gi[gk[r]], pi[pk[c]]] += 1
    rows, cols = linear_sum_assignment(-overlap)
    idtp = float(overlap[rows, cols].sum())
    idp = idtp / n_pr if n_pr else 0.0
    idr = idtp / n_gt if n_gt else 0.0
    f1 = 2 * idtp / (n_pr + n_gt) if (n_pr + n_gt) else 0.0
    return f1, idp, idr


def clear_mot(gt, preds, iou_min: float = 0.5) -> EvalReport:
    gt_t, pr_t = frame_table(gt), frame_table(preds)
    frames = sorted(set(gt_t) | set(pr_t))
    fp = fn = ids = tp = 0
    previous: dict[int, int] = {}
    last_match: dict[int, int] = {}
    gt_frames: dict[int, int] = defaultdict(int)
    gt_hits: dict[int, int] = defaultdict(int)
    for f in frames:
        gobjs, pobjs = gt_t.get(f, {}), pr_t.get(f, {})
        m = match_frame(gobjs, pobjs, iou_min, previous)
        for g in gobjs:
            gt_frames[g] += 1
        for g, p in m.items():
            gt_hits[g] += 1
            if g in last_match and last_match[g] != p:
                ids += 1
            last_match[g] = p
        tp += len(m)
        fn += len(gobjs) - len(m)
        fp += len(pobjs) - len(m)
        previous = m
    n_gt = sum(gt_frames.values())
    mt = pt = ml = 0
    for g, total in gt_frames.items():
        ratio = gt_hits[g] / total
        if ratio >= 0.8:
            mt += 1
        elif ratio > 0.2:
            pt += 1
        else:
            ml += 1
    f1, idp, idr = idf1(gt_t, pr_t, iou_min)
    return EvalReport(
        MOTA=1.0 - (fp + fn + ids) / n_gt if n_gt else 0.0,
        IDF1=f1, IDP=idp, IDR=idr,
        Recall=tp / n_gt if n_gt else 0.0,
        Precision=tp / (tp + fp) if (tp + fp) else 0.0,
        FP=fp, FN=fn, IDs=ids, MT=mt, PT=pt, ML=ml, GT_count=n_gt,
    )
