"""Global hypothesis selection, N-scan pruning and final track assembly."""

from __future__ import annotations

import itertools
from collections import defaultdict
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .config import Config
from .core import FinalTrack
from .kalman import MotionNoise, rts_smooth
from .tracker import TrackletTracker, TrackTree, TreeNode


@dataclass
class ConflictGraph:
    weights: np.ndarray
    adj: list[set[int]]
    refs: list = field(default_factory=list)  # (tree, leaf) per node

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def edges(self) -> list[tuple[int, int]]:
        return sorted((i, j) for i, nb in enumerate(self.adj) for j in nb if i < j)

    @classmethod
    def from_edges(cls, weights: Sequence[float], edges, refs=None) -> ConflictGraph:
        adj = [set() for _ in weights]
        for i, j in edges:
            if i == j:
                raise ValueError("self-loop in conflict graph")
            adj[i].add(j)
            adj[j].add(i)
        return cls(np.asarray(weights, dtype=float), adj, list(refs or []))


def build_conflict_graph(trees: Sequence[TrackTree]) -> ConflictGraph:
    """One node per leaf; an edge wherever two hypotheses share a det_id."""
    refs = [(tree, leaf) for tree in trees for leaf in tree.leaves]
    weights = [leaf.cum_score for _, leaf in refs]
    owners: dict[int, list[int]] = defaultdict(list)
    for i, (_, leaf) in enumerate(refs):
        for det_id in leaf.path_det_ids:
            owners[det_id].append(i)
    adj = [set() for _ in refs]
    for nodes in owners.values():
        for i, j in itertools.combinations(nodes, 2):
            adj[i].add(j)
            adj[j].add(i)
    return ConflictGraph(np.asarray(weights, dtype=float), adj, refs)


def independent_set_weight(g: ConflictGraph, selected) -> float:
    return float(sum(g.weights[i] for i in selected))


def is_independent(g: ConflictGraph, selected) -> bool:
    sel = set(selected)
    return all(not (g.adj[i] & sel) for i in sel)


def mwis_exact(g: ConflictGraph, max_nodes: int | None = 40) -> list[int]:
    """Maximum-weight independent set by branch and bound.

    Nodes with weight <= 0 are never selected. Branches on the highest-degree
    candidate; the bound is a greedy clique cover of the remaining candidates.
    """
    n = len(g)
    if max_nodes is not None and n > max_nodes:
        raise ValueError(f"{n} nodes exceed the exact MWIS threshold {max_nodes}")
    w = g.weights.tolist()
    nb = [0] * n
    for i in range(n):
        for j in g.adj[i]:
            nb[i] |= 1 << j
    start = sum(1 << i for i in range(n) if w[i] > 0)
    by_weight = sorted(range(n), key=lambda i: (-w[i], i))
    best_val = 0.0
    best_set = 0

    def members(mask: int) -> list[int]:
        out = []
        while mask:
            low = mask & -mask
            out.append(low.bit_length() - 1)
            mask ^= low
        return out

    def bound(mask: int) -> float:
        cliques: list[int] = []
        total = 0.0
        for v in by_weight:
            if not mask >> v & 1:
                continue
            for k, c in enumerate(cliques):
                if c & ~nb[v] == 0:
                    cliques[k] = c | (1 << v)
                    break
            else:
                cliques.append(1 << v)
                total += w[v]
        return total

    def rec(mask: int, chosen: int, value: float) -> None:
        nonlocal best_val, best_set
        # isolated candidates are always taken
        while True:
            iso = [v for v in members(mask) if nb[v] & mask == 0]
            if not iso:
                break
            for v in iso:
                chosen |= 1 << v
                value += w[v]
                mask &= ~(1 << v)
        if mask == 0:
            if value > best_val + 1e-12:
                best_val, best_set = value, chosen
            return
        if value + bound(mask) <= best_val + 1e-12:
            return
        v = max(members(mask), key=lambda u: ((nb[u] & mask).bit_count(), w[u], -u))
        rec(mask & ~nb[v] & ~(1 << v), chosen | (1 << v), value + w[v])
        rec(mask & ~(1 << v), chosen, value)

    rec(start, 0, 0.0)
    return members(best_set)


def mwis_greedy(g: ConflictGraph) -> list[int]:
    """Repeatedly take the best weight/(degree + 1) candidate and drop its neighbours."""
    alive = {i for i in range(len(g)) if g.weights[i] > 0}
    chosen = []
    while alive:
        v = max(sorted(alive), key=lambda u: g.weights[u] / (len(g.adj[u] & alive) + 1))
        chosen.append(v)
        alive -= g.adj[v] | {v}
    return sorted(chosen)


def mwis_bruteforce(g: ConflictGraph) -> list[int]:
    """Enumerate all 2^n subsets (test oracle, n <= 15)."""
    n = len(g)
    if n > 15:
        raise ValueError(f"brute force refused for {n} > 15 nodes")
    if n == 0:
        return []
    subsets = np.arange(1 << n, dtype=np.int64)
    bits = (subsets[:, None] >> np.arange(n)) & 1
    ok = np.ones(subsets.size, dtype=bool)
    for i, j in g.edges:
        ok &= ~((bits[:, i] == 1) & (bits[:, j] == 1))
    ok &= ~(bits[:, g.weights <= 0] == 1).any(axis=1)
    totals = np.where(ok, bits @ g.weights, -np.inf)
    best = int(np.argmax(totals))
    return [i for i in range(n) if best >> i & 1]


def select_hypotheses(g: ConflictGraph, exact_max: int = 40) -> tuple[list[int], str]:
    """MWIS per connected component; exact below ``exact_max`` nodes, greedy above."""
    n = len(g)
    if n == 0:
        return [], "exact"
    rows = [i for i, nb in enumerate(g.adj) for _ in nb]
    cols = [j for nb in g.adj for j in nb]
    mat = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    n_comp, comp = connected_components(mat, directed=False)
    selected: list[int] = []
    solver = "exact"
    for c in range(n_comp):
        idx = np.flatnonzero(comp == c).tolist()
        local_index = {v: k for k, v in enumerate(idx)}
        sub = ConflictGraph(
            g.weights[idx], [{local_index[u] for u in g.adj[v]} for v in idx]
        )
        if len(idx) <= exact_max:
            local = mwis_exact(sub, None)
        else:
            local = mwis_greedy(sub)
            solver = "mixed"
        selected.extend(idx[k] for k in local)
    return sorted(selected), solver


def _retire(tree: TrackTree, retired: list | None) -> None:
    if retired is not None and tree.committed is not None:
        retired.append(tree)


def nscan_prune(
    trees: Sequence[TrackTree],
    selected: Sequence[TreeNode],
    k: int,
    current_round: int,
    retired: list | None = None,
) -> list[TrackTree]:
    """Commit each selected branch ``k`` levels above its leaf and cut competitors.

    In every tree holding a selected leaf, only branches through the ancestor
    ``k`` steps above that leaf survive, and the path down to that ancestor is
    committed. Leaves elsewhere that reuse committed det_ids are removed.
    Trees without a selected leaf are dropped once older than ``k`` rounds.
    Dropped trees with a committed path go to ``retired``.
    """
    if k < 1:
        raise ValueError("pruning depth must be >= 1")
    chosen = {id(leaf) for leaf in selected}
    kept: list[TrackTree] = []
    claimed: dict[int, int] = {}
    for tree in trees:
        leaf = next((lf for lf in tree.leaves if id(lf) in chosen), None)
        if leaf is None:
            if tree.age(current_round) > k:
                tree.restrict_to([])
                _retire(tree, retired)
            else:
                kept.append(tree)
            continue
        anchor = leaf.ancestor(k)
        tree.restrict_to([lf for lf in tree.leaves if anchor in lf.path()])
        tree.committed = anchor
        for det_id in anchor.path_det_ids:
            claimed[det_id] = tree.tree_id
        kept.append(tree)
    survivors = []
    for tree in kept:
        leaves = [
            lf for lf in tree.leaves
            if all(claimed.get(d, tree.tree_id) == tree.tree_id for d in lf.path_det_ids)
        ]
        if len(leaves) != len(tree.leaves):
            tree.restrict_to(leaves)
        if tree.leaves:
            survivors.append(tree)
        else:
            _retire(tree, retired)
    return survivors


def association_round(tracker: TrackletTracker, final: bool = False) -> dict:
    """Select hypotheses over all live trees and prune; returns round diagnostics."""
    cfg = tracker.cfg
    g = build_conflict_graph(tracker.trees)
    picked, solver = select_hypotheses(g, cfg.mwis_exact_max)
    leaves = [g.refs[i][1] for i in picked]
    if final:
        chosen = {id(lf) for lf in leaves}
        for tree in tracker.trees:
            leaf = next((lf for lf in tree.leaves if id(lf) in chosen), None)
            if leaf is not None:
                tree.restrict_to([leaf])
                tree.committed = leaf
            _retire(tree, tracker.retired)
        tracker.trees = []
    else:
        tracker.trees = nscan_prune(tracker.trees, leaves, cfg.prune_depth, tracker.round, tracker.retired)
    return {
        "round": tracker.round,
        "nodes": len(g),
        "edges": len(g.edges),
        "solver": solver,
        "objective": round(independent_set_weight(g, picked), 9),
        "selected": len(picked),
    }


def raw_track(tree: TrackTree, track_id: int) -> FinalTrack:
    boxes, scores, det_ids = {}, {}, []
    for node in tree.committed_path():
        if node.tracklet is None:
            continue
        for frame, det in node.tracklet.members.items():
            boxes[frame] = det.box
            scores[frame] = det.score
            det_ids.append(det.det_id)
    return FinalTrack(track_id, dict(sorted(boxes.items())), scores, det_ids)


def smooth_track(raw: FinalTrack, noise: MotionNoise = MotionNoise()) -> FinalTrack:
    """RTS-smooth a track and fill interior gaps, flagging the filled frames."""
    frames = raw.frames
    if len(frames) <= 1:
        return FinalTrack(raw.track_id, dict(raw.boxes), dict(raw.scores), list(raw.det_ids), set(raw.interpolated))
    smoothed = rts_smooth(frames, [raw.boxes[f] for f in frames], noise)
    observed = [raw.scores[f] for f in frames if f in raw.scores]
    fill = float(np.mean(observed)) if observed else 0.0
    scores = {f: raw.scores.get(f, fill) for f in smoothed}
    filled = {f for f in smoothed if f not in raw.boxes}
    return FinalTrack(raw.track_id, smoothed, scores, list(raw.det_ids), filled | set(raw.interpolated))


def assemble_tracks(retired: Sequence[TrackTree], cfg: Config) -> list[FinalTrack]:
    """Committed paths to final tracks, numbered 1.. by first frame."""
    raws = [raw_track(tree, tree.tree_id) for tree in retired]
    raws = [r for r in raws if len(r.boxes) >= max(cfg.min_track_hits, 1)]
    raws.sort(key=lambda r: (r.frames[0], r.track_id))
    noise = MotionNoise.from_config(cfg)
    out = []
    for new_id, r in enumerate(raws, start=1):
        r.track_id = new_id
        out.append(smooth_track(r, noise) if cfg.smooth else r)
    return out
