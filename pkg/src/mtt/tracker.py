"""Tracklet trees: gating, scoring and hypothesis growth.

Every new tracklet spawns a tree. Each existing leaf is extended by every
new tracklet that passes both the motion and the appearance gate, and by
one dummy child that stands for a missed observation. A root-to-leaf path
is one trajectory hypothesis whose score is the sum of its node scores.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np

from .config import Config
from .core import EmbeddingTable, Tracklet
from .kalman import KalmanState, MotionNoise, kalman_init, kalman_predict, kalman_update

logger = logging.getLogger(__name__)

ROOT, TRACKLET, DUMMY = "root", "tracklet", "dummy"


# ---------------------------------------------------------------------------
# features and gates

def tracklet_feature(t: Tracklet, emb: EmbeddingTable | None) -> np.ndarray | None:
    """Confidence-weighted mean of member embeddings, renormalized."""
    if emb is None:
        return None
    vecs, weights = [], []
    for d in t.detections:
        v = emb.get(d.det_id)
        if v is not None:
            vecs.append(v)
            weights.append(d.score)
    if not vecs:
        return None
    weights = np.asarray(weights, dtype=float)
    if weights.sum() <= 0:
        weights = np.ones_like(weights)
    f = (weights / weights.sum()) @ np.asarray(vecs)
    norm = np.linalg.norm(f)
    return f / norm if norm > 0 else None


def appearance_gate(f1, f2, threshold: float) -> tuple[bool, float | None]:
    """Cosine similarity gate; passes when similarity >= threshold.

    A missing or zero vector skips the gate: ``(True, None)``.
    """
    if f1 is None or f2 is None:
        return True, None
    n1, n2 = np.linalg.norm(f1), np.linalg.norm(f2)
    if n1 == 0 or n2 == 0:
        return True, None
    sim = float(np.dot(f1, f2) / (n1 * n2))
    return sim >= threshold, sim


def motion_gate(innovation, innovation_cov, threshold: float) -> tuple[bool, float]:
    """Squared Mahalanobis distance of the innovation; fails closed when singular."""
    try:
        d = float(innovation @ np.linalg.solve(innovation_cov, innovation))
    except np.linalg.LinAlgError:
        logger.debug("singular innovation covariance, gate closed")
        return False, math.inf
    if not math.isfinite(d):
        return False, math.inf
    return d <= threshold, d


# ---------------------------------------------------------------------------
# scores

def score_motion(d_motion: float, innovation_cov, v_space: float) -> float:
    _, logdet = np.linalg.slogdet(np.asarray(innovation_cov, dtype=float))
    return math.log(v_space / (2 * math.pi)) - 0.5 * logdet - d_motion / 2.0


def score_appearance(d_app: float, null_appearance: float) -> float:
    return -float(np.logaddexp(0.0, -2.0 * d_app)) - math.log(null_appearance)


def score_confidence(mean_score: float, min_score: float) -> float:
    return math.tanh(mean_score - min_score)


@dataclass(frozen=True)
class HypothesisScore:
    s_mot: float = 0.0
    s_app: float = 0.0
    s_conf: float = 0.0
    s_total: float = 0.0

    @classmethod
    def combine(cls, s_mot: float, s_app: float, s_conf: float, cfg: Config) -> HypothesisScore:
        return cls(s_mot, s_app, s_conf, score_total((s_mot, s_app, s_conf), cfg))


def score_total(components: Sequence[float], cfg: Config | Sequence[float] | None = None) -> float:
    """Weighted sum of (motion, appearance, confidence) scores."""
    if cfg is None:
        cfg = Config()
    weights = (cfg.w_motion, cfg.w_appearance, cfg.w_confidence) if isinstance(cfg, Config) else tuple(cfg)
    s_mot, s_app, s_conf = components
    w_mot, w_app, w_conf = weights
    return w_mot * s_mot + w_app * s_app + w_conf * s_conf


def dummy_score(miss_count: int, cfg: Config) -> float:
    """Contribution of a missed-observation node: ``-miss_penalty * miss_count``.

    Strictly negative, so a chain of misses loses score at every step.
    """
    return -cfg.miss_penalty * miss_count


# ---------------------------------------------------------------------------
# tree structure

@dataclass(eq=False)
class TreeNode:
    kind: str
    kstate: KalmanState
    feature: np.ndarray | None = None
    tracklet: Tracklet | None = None
    parent: TreeNode | None = None
    children: list[TreeNode] = field(default_factory=list)
    miss_count: int = 0
    score: HypothesisScore = HypothesisScore()
    cum_score: float = 0.0
    depth: int = 0
    serial: int = 0
    path_det_ids: frozenset = frozenset()

    def path(self) -> list[TreeNode]:
        """Nodes from the root down to this one."""
        nodes = []
        node: TreeNode | None = self
        while node is not None:
            nodes.append(node)
            node = node.parent
        return nodes[::-1]

    def ancestor(self, steps: int) -> TreeNode:
        node = self
        for _ in range(steps):
            if node.parent is None:
                break
            node = node.parent
        return node

    @property
    def last_frame(self) -> int:
        return self.kstate.frame


@dataclass(eq=False)
class TrackTree:
    tree_id: int
    root: TreeNode
    leaves: list[TreeNode]
    born_round: int = 0
    committed: TreeNode | None = None  # deepest node on the decided path

    def committed_path(self) -> list[TreeNode]:
        return self.committed.path() if self.committed is not None else []

    def age(self, current_round: int) -> int:
        return current_round - self.born_round

    def restrict_to(self, keep: Iterable[TreeNode]) -> None:
        """Drop every leaf not in ``keep`` along with branches left without leaves."""
        keep = list(keep)
        alive: set[int] = set()
        for leaf in keep:
            node: TreeNode | None = leaf
            while node is not None and id(node) not in alive:
                alive.add(id(node))
                node = node.parent
        stack = [self.root]
        while stack:
            node = stack.pop()
            node.children = [c for c in node.children if id(c) in alive]
            stack.extend(node.children)
        self.leaves = keep


class TrackletTracker:
    """Holds the live trees and grows them one subsequence at a time."""

    def __init__(self, cfg: Config | None = None, emb: EmbeddingTable | None = None, log_events: bool = False):
        self.cfg = cfg or Config()
        self.emb = emb
        self.noise = MotionNoise.from_config(self.cfg)
        self.trees: list[TrackTree] = []
        self.retired: list[TrackTree] = []
        self.round = 0
        self.events: list[str] | None = [] if log_events else None
        self._tree_ids = itertools.count(1)
        self._serials = itertools.count()
        self.n_trees_spawned = 0
        self.n_hypotheses = 0

    def _log(self, tree: TrackTree, node: TreeNode) -> None:
        if self.events is not None:
            s = node.score
            tid = node.tracklet.id if node.tracklet is not None else -1
            self.events.append(
                f"round={self.round} tree={tree.tree_id} kind={node.kind} tracklet={tid} "
                f"s_mot={s.s_mot:.4f} s_app={s.s_app:.4f} s_conf={s.s_conf:.4f} "
                f"s_total={s.s_total:.4f} cum={node.cum_score:.4f}"
            )

    def _feature(self, t: Tracklet) -> np.ndarray | None:
        if t.feature is None and self.emb is not None:
            t.feature = tracklet_feature(t, self.emb)
        return t.feature

    # -- node construction

    def spawn(self, t: Tracklet) -> TrackTree:
        dets = t.detections
        ks = kalman_init(dets[0].box, dets[0].frame, self.noise)
        for d in dets[1:]:
            ks = kalman_predict(ks, d.frame - ks.frame, self.noise)
            ks, _, _ = kalman_update(ks, d.box, self.noise)
        s_conf = score_confidence(t.mean_score, self.cfg.min_score)
        score = HypothesisScore.combine(0.0, 0.0, s_conf, self.cfg)
        root = TreeNode(
            ROOT, ks, self._feature(t), t, score=score, cum_score=score.s_total,
            serial=next(self._serials), path_det_ids=t.det_ids,
        )
        tree = TrackTree(next(self._tree_ids), root, [root], born_round=self.round)
        self.n_trees_spawned += 1
        self._log(tree, root)
        return tree

    def try_attach(self, leaf: TreeNode, t: Tracklet) -> TreeNode | None:
        """Child node for ``t`` under ``leaf``, or None when a gate rejects it."""
        if t.start <= leaf.last_frame or leaf.path_det_ids & t.det_ids:
            return None
        ok, d_app = appearance_gate(leaf.feature, self._feature(t), self.cfg.appearance_gate)
        if not ok:
            return None
        dets = t.detections
        ks = kalman_predict(leaf.kstate, dets[0].frame - leaf.last_frame, self.noise)
        ks, innov, S = kalman_update(ks, dets[0].box, self.noise)
        ok, d_motion = motion_gate(innov, S, self.cfg.motion_gate)
        if not ok:
            return None
        for d in dets[1:]:
            ks = kalman_predict(ks, d.frame - ks.frame, self.noise)
            ks, _, _ = kalman_update(ks, d.box, self.noise)
        s_mot = score_motion(d_motion, S, self.cfg.observation_volume)
        s_app = score_appearance(self.cfg.appearance_gate if d_app is None else d_app, self.cfg.null_appearance)
        s_conf = score_confidence(t.mean_score, self.cfg.min_score)
        score = HypothesisScore.combine(s_mot, s_app, s_conf, self.cfg)
        feat = t.feature
        if leaf.feature is not None and feat is not None:
            blend = 0.5 * leaf.feature + 0.5 * feat
            feat = blend / np.linalg.norm(blend)
        elif feat is None:
            feat = leaf.feature
        return TreeNode(
            TRACKLET, ks, feat, t, parent=leaf, score=score, cum_score=leaf.cum_score + score.s_total,
            depth=leaf.depth + 1, serial=next(self._serials), path_det_ids=leaf.path_det_ids | t.det_ids,
        )

    def dummy(self, leaf: TreeNode) -> TreeNode:
        # keeps the parent's filter state; the prediction over the whole gap
        # happens when a later tracklet is attached
        miss = leaf.miss_count + 1
        return TreeNode(
            DUMMY, leaf.kstate, leaf.feature, None, parent=leaf, miss_count=miss,
            cum_score=leaf.cum_score + dummy_score(miss, self.cfg), depth=leaf.depth + 1,
            serial=next(self._serials), path_det_ids=leaf.path_det_ids,
        )

    # -- one round

    def advance(self, new_tracklets: Sequence[Tracklet]) -> list[TrackTree]:
        """Extend every tree with the tracklets of the next subsequence."""
        self.round += 1
        cfg = self.cfg
        survivors: list[TrackTree] = []
        for tree in self.trees:
            new_leaves: list[TreeNode] = []
            for leaf in tree.leaves:
                for t in new_tracklets:
                    child = self.try_attach(leaf, t)
                    if child is not None:
                        leaf.children.append(child)
                        new_leaves.append(child)
                        self._log(tree, child)
                if leaf.miss_count + 1 <= cfg.patience:
                    child = self.dummy(leaf)
                    leaf.children.append(child)
                    new_leaves.append(child)
                    self._log(tree, child)
            if not new_leaves:
                tree.restrict_to([])
                self.retired.append(tree)
                continue
            new_leaves.sort(key=lambda n: (-n.cum_score, n.serial))
            tree.restrict_to(new_leaves[: cfg.max_leaves])
            survivors.append(tree)
        for t in new_tracklets:
            survivors.append(self.spawn(t))
        self.trees = survivors
        self.n_hypotheses += sum(len(tr.leaves) for tr in survivors)
        return survivors


def advance(trees: list[TrackTree], new_tracklets: Sequence[Tracklet], cfg: Config | None = None,
            emb: EmbeddingTable | None = None) -> list[TrackTree]:
    """Functional form of :meth:`TrackletTracker.advance` for a given set of trees."""
    tracker = TrackletTracker(cfg, emb)
    tracker.trees = list(trees)
    if trees:
        ids = [tr.tree_id for tr in trees]
        tracker._tree_ids = itertools.count(max(ids) + 1)
        tracker.round = max(tr.born_round for tr in trees)
    return tracker.advance(new_tracklets)
