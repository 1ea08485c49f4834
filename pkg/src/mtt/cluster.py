"""Detection pre-filtering and density clustering within a subsequence."""

from __future__ import annotations

import logging
from collections import defaultdict, deque
from collections.abc import Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .core import Detection, EmbeddingTable

logger = logging.getLogger(__name__)

NOISE = -1


def iou(a, b) -> float:
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    iw = min(ax + aw, bx + bw) - max(ax, bx)
    ih = min(ay + ah, by + bh) - max(ay, by)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (aw * ah + bw * bh - inter)


def iou_matrix(boxes_a: np.ndarray, boxes_b: np.ndarray) -> np.ndarray:
    """Pairwise IoU of two (n, 4) arrays of top-left/width/height boxes."""
    a = np.asarray(boxes_a, dtype=float).reshape(-1, 4)
    b = np.asarray(boxes_b, dtype=float).reshape(-1, 4)
    x1 = np.maximum(a[:, None, 0], b[None, :, 0])
    y1 = np.maximum(a[:, None, 1], b[None, :, 1])
    x2 = np.minimum(a[:, None, 0] + a[:, None, 2], b[None, :, 0] + b[None, :, 2])
    y2 = np.minimum(a[:, None, 1] + a[:, None, 3], b[None, :, 1] + b[None, :, 3])
    inter = np.clip(x2 - x1, 0, None) * np.clip(y2 - y1, 0, None)
    union = (a[:, 2] * a[:, 3])[:, None] + (b[:, 2] * b[:, 3])[None, :] - inter
    return np.where(union > 0, inter / np.where(union > 0, union, 1.0), 0.0)


def prefilter(dets: Sequence[Detection], min_score: float = 0.1, nms_iou: float = 0.5) -> list[Detection]:
    """Drop detections below ``min_score``, then greedy per-frame NMS."""
    by_frame: dict[int, list[Detection]] = defaultdict(list)
    for d in dets:
        if d.score >= min_score:
            by_frame[d.frame].append(d)
    kept: list[Detection] = []
    for frame in sorted(by_frame):
        cands = sorted(by_frame[frame], key=lambda d: (-d.score, d.det_id))
        chosen: list[Detection] = []
        for d in cands:
            if all(iou(d.box, k.box) <= nms_iou for k in chosen):
                chosen.append(d)
        kept.extend(sorted(chosen, key=lambda d: d.det_id))
    return kept


def centers(dets: Sequence[Detection]) -> np.ndarray:
    return np.array([d.center for d in dets], dtype=float).reshape(-1, 2)


def pixel_distance_matrix(dets: Sequence[Detection]) -> np.ndarray:
    """Euclidean distances between box centers."""
    c = centers(dets)
    dm = cdist(c, c)
    np.fill_diagonal(dm, 0.0)
    return dm


def weighted_distance_matrix(
    dets: Sequence[Detection],
    emb: EmbeddingTable,
    alpha: float = 1.0,
    beta: float = 1.0,
    diagonal: float = float(np.hypot(1920, 1080)),
) -> tuple[np.ndarray, int]:
    """alpha * cosine distance + beta * center distance / image diagonal.

    Pairs where either embedding is missing keep only the position term.
    Returns the matrix and the number of such pairs.
    """
    dm = beta * pixel_distance_matrix(dets) / diagonal
    n = len(dets)
    vecs = [emb.get(d.det_id) for d in dets]
    have = np.array([v is not None for v in vecs], dtype=bool)
    missing_pairs = 0
    if n and alpha:
        if have.any():
            dim = next(v for v in vecs if v is not None).size
            mat = np.stack([v if v is not None else np.zeros(dim) for v in vecs])
            cos_dist = 1.0 - mat @ mat.T
            both = np.outer(have, have)
            dm = dm + alpha * np.where(both, cos_dist, 0.0)
        missing_pairs = int(n * (n - 1) // 2 - np.triu(np.outer(have, have), 1).sum())
    if missing_pairs:
        logger.debug("%d pairs without embeddings use the position term only", missing_pairs)
    dm = np.clip((dm + dm.T) / 2.0, 0.0, None)
    np.fill_diagonal(dm, 0.0)
    return dm, missing_pairs


def dbscan(dm: np.ndarray, eps: float, min_samples: int) -> np.ndarray:
    """Density clustering on a precomputed distance matrix.

    The eps-neighbourhood includes the point itself. Border points go to the
    cluster of their first core neighbour in index order. Returns one label
    per row, ``NOISE`` for unclustered points; cluster ids follow the index
    of each cluster's first core point.
    """
    dm = np.asarray(dm, dtype=float)
    n = dm.shape[0]
    labels = np.full(n, NOISE, dtype=int)
    if n == 0:
        return labels
    neighbours = [np.flatnonzero(dm[i] <= eps) for i in range(n)]
    core = np.array([len(nb) >= min_samples for nb in neighbours])
    cluster = 0
    for i in range(n):
        if not core[i] or labels[i] != NOISE:
            continue
        labels[i] = cluster
        queue = deque([i])
        while queue:
            p = queue.popleft()
            for q in neighbours[p]:
                if core[q] and labels[q] == NOISE:
                    labels[q] = cluster
                    queue.append(q)
        cluster += 1
    for i in np.flatnonzero(~core):
        for q in neighbours[i]:
            if core[q]:
                labels[i] = labels[q]
                break
    return labels


def cluster_groups(labels: np.ndarray) -> list[list[int]]:
    """Index groups per cluster, NOISE points as singletons, ordered by first index."""
    groups: dict[int, list[int]] = defaultdict(list)
    singletons = []
    for i, lab in enumerate(labels):
        if lab == NOISE:
            singletons.append([i])
        else:
            groups[int(lab)].append(i)
    out = list(groups.values()) + singletons
    out.sort(key=lambda g: g[0])
    return out


def cluster_debug_rows(dets: Sequence[Detection], labels: np.ndarray) -> list[str]:
    rows = []
    for d, lab in zip(dets, labels):
        cx, cy = d.center
        rows.append(f"{d.det_id},{d.frame},{cx:.3f},{cy:.3f},{int(lab)}\n")
    return rows
