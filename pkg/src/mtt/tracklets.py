"""Tracklet generation by clique partitioning of a cluster's affinity graph.

Each cluster of detections becomes a K-partite graph (one part per frame).
Pairs that share a frame, move faster than one box width per frame, or look
too different are forbidden; the remaining pairs carry a product affinity.
Tracklets are the blocks of the partition into allowed cliques that
maximises the total within-block affinity.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Iterator, Sequence
from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components

from .config import Config
from .core import Detection, EmbeddingTable, Tracklet
from .partition import Subsequence
from .tracker import tracklet_feature

Partition = list[list[int]]


class SolverBudgetError(RuntimeError):
    """A clique-partition instance is larger than the exact solver budget."""


@dataclass
class AffinityGraph:
    nodes: list[Detection]
    weight: np.ndarray  # symmetric; meaningful only where ``allowed``
    allowed: np.ndarray  # symmetric bool, False on the diagonal

    def __len__(self) -> int:
        return len(self.nodes)

    def is_forbidden(self, i: int, j: int) -> bool:
        return not self.allowed[i, j]


def edge_weights(cluster: Sequence[Detection], emb: EmbeddingTable | None, cfg: Config | None = None) -> AffinityGraph:
    cfg = cfg or Config()
    n = len(cluster)
    weight = np.zeros((n, n))
    allowed = np.zeros((n, n), dtype=bool)
    vecs = [emb.get(d.det_id) if emb is not None else None for d in cluster]
    cs = [d.center for d in cluster]
    for i, j in itertools.combinations(range(n), 2):
        a, b = cluster[i], cluster[j]
        gap = abs(a.frame - b.frame)
        if gap == 0:
            continue
        dist = math.hypot(cs[i][0] - cs[j][0], cs[i][1] - cs[j][1])
        if dist >= min(a.width, b.width) * gap:
            continue
        sim = 1.0
        if vecs[i] is not None and vecs[j] is not None:
            sim = float(vecs[i] @ vecs[j])
            if sim < cfg.appearance_gate:
                continue
        allowed[i, j] = allowed[j, i] = True
        weight[i, j] = weight[j, i] = math.exp(-dist / cfg.position_scale) * sim
    return AffinityGraph(list(cluster), weight, allowed)


def partition_objective(g: AffinityGraph, blocks: Partition) -> float:
    total = 0.0
    for block in blocks:
        for i, j in itertools.combinations(sorted(block), 2):
            total += g.weight[i, j]
    return total


def is_valid_partition(g: AffinityGraph, blocks: Partition) -> bool:
    seen = sorted(i for b in blocks for i in b)
    if seen != list(range(len(g))):
        return False
    for block in blocks:
        frames = [g.nodes[i].frame for i in block]
        if len(set(frames)) != len(frames):
            return False
        if any(not g.allowed[i, j] for i, j in itertools.combinations(block, 2)):
            return False
    return True


def _canonical(blocks: Partition, g: AffinityGraph) -> Partition:
    out = [sorted(b, key=lambda i: g.nodes[i].det_id) for b in blocks if b]
    out.sort(key=lambda b: g.nodes[b[0]].det_id)
    return out


def _solve_component(w: np.ndarray, allowed: np.ndarray) -> Partition:
    """Exact branch-and-bound over sequential block assignment."""
    m = w.shape[0]
    if m == 1:
        return [[0]]
    wpos = np.where(allowed, np.clip(w, 0.0, None), 0.0)
    allow_mask = [sum(1 << j for j in np.flatnonzero(allowed[i])) for i in range(m)]
    wl = w.tolist()
    wposl = wpos.tolist()
    # positive weight still obtainable from edges among not-yet-assigned nodes
    future = [float(wpos[i, i + 1:].sum()) for i in range(m)]
    tail_future = [0.0] * (m + 1)
    for i in range(m - 1, -1, -1):
        tail_future[i] = tail_future[i + 1] + future[i]

    members: list[list[int]] = []
    compat: list[int] = []
    assign = [0] * m
    best_val = -math.inf
    best_assign: list[int] = []

    def bound(i: int) -> float:
        extra = tail_future[i]
        for j in range(i, m):
            row = wposl[j]
            top = 0.0
            for b, mem in enumerate(members):
                if compat[b] >> j & 1:
                    s = 0.0
                    for k in mem:
                        s += row[k]
                    top = max(top, s)
            extra += top
        return extra

    def options(i: int) -> list[tuple[float, int]]:
        row = wl[i]
        opts = []
        for b, mem in enumerate(members):
            if compat[b] >> i & 1:
                opts.append((sum(row[k] for k in mem), b))
        opts.append((0.0, -1))
        opts.sort(key=lambda o: (-o[0], o[1] if o[1] >= 0 else len(members)))
        return opts

    def dfs(i: int, value: float) -> None:
        nonlocal best_val, best_assign
        if i == m:
            if value > best_val + 1e-12:
                best_val, best_assign = value, list(assign)
            return
        if value + bound(i) <= best_val + 1e-12:
            return
        for gain, b in options(i):
            if b >= 0:
                members[b].append(i)
                saved = compat[b]
                compat[b] &= allow_mask[i]
                assign[i] = b
                dfs(i + 1, value + gain)
                compat[b] = saved
                members[b].pop()
            else:
                members.append([i])
                compat.append(allow_mask[i])
                assign[i] = len(members) - 1
                dfs(i + 1, value)
                members.pop()
                compat.pop()

    dfs(0, 0.0)
    blocks: dict[int, list[int]] = {}
    for i, b in enumerate(best_assign):
        blocks.setdefault(b, []).append(i)
    return list(blocks.values())


def _greedy_component(w: np.ndarray, allowed: np.ndarray) -> Partition:
    """Merge the pair of blocks with the largest positive gain until none is left."""
    blocks = [[i] for i in range(w.shape[0])]
    while True:
        best = (0.0, -1, -1)
        for a, b in itertools.combinations(range(len(blocks)), 2):
            if all(allowed[i, j] for i in blocks[a] for j in blocks[b]):
                gain = sum(w[i, j] for i in blocks[a] for j in blocks[b])
                if gain > best[0]:
                    best = (gain, a, b)
        if best[1] < 0:
            return blocks
        _, a, b = best
        blocks[a] = blocks[a] + blocks[b]
        del blocks[b]


def solve_clique_partition(g: AffinityGraph, budget: int = 70, greedy_fallback: bool = False) -> Partition:
    """Maximum-weight partition of ``g`` into cliques of allowed edges.

    The graph is split into connected components of positive allowed edges
    (no optimal block needs to cross them) and each is solved exactly.
    Components larger than ``budget`` raise ``SolverBudgetError`` unless
    ``greedy_fallback`` is set.
    """
    n = len(g)
    if n == 0:
        return []
    positive = g.allowed & (g.weight > 0)
    n_comp, comp = connected_components(positive, directed=False)
    blocks: Partition = []
    for c in range(n_comp):
        idx = np.flatnonzero(comp == c)
        if idx.size > budget:
            if not greedy_fallback:
                raise SolverBudgetError(f"component of {idx.size} nodes exceeds budget {budget}")
            local = _greedy_component(g.weight[np.ix_(idx, idx)], g.allowed[np.ix_(idx, idx)])
        else:
            local = _solve_component(g.weight[np.ix_(idx, idx)], g.allowed[np.ix_(idx, idx)])
        blocks.extend([int(idx[i]) for i in b] for b in local)
    return _canonical(blocks, g)


def _set_partitions(n: int, allowed: np.ndarray) -> Iterator[Partition]:
    blocks: Partition = []

    def rec(i: int):
        if i == n:
            yield [list(b) for b in blocks]
            return
        for b in blocks:
            if all(allowed[i, j] for j in b):
                b.append(i)
                yield from rec(i + 1)
                b.pop()
        blocks.append([i])
        yield from rec(i + 1)
        blocks.pop()

    yield from rec(0)


def brute_force_partition(g: AffinityGraph) -> Partition:
    """Exhaustive search over every feasible set partition (test oracle, <= 10 nodes)."""
    if len(g) > 10:
        raise ValueError(f"brute force refused for {len(g)} > 10 nodes")
    best, best_val = [], -math.inf
    for p in _set_partitions(len(g), g.allowed):
        val = partition_objective(g, p)
        if val > best_val + 1e-12:
            best, best_val = p, val
    return _canonical(best, g)


def tracklets_from_partition(
    g: AffinityGraph,
    blocks: Partition,
    subseq: Subsequence | None = None,
    emb: EmbeddingTable | None = None,
    next_id: int = 0,
) -> list[Tracklet]:
    """One tracklet per block, ids assigned consecutively from ``next_id``."""
    out = []
    for block in _canonical(blocks, g):
        members = {g.nodes[i].frame: g.nodes[i] for i in block}
        if subseq is not None and any(f not in subseq for f in members):
            raise ValueError("block member outside its subsequence")
        t = Tracklet(next_id + len(out), members)
        t.feature = tracklet_feature(t, emb) if emb is not None else None
        out.append(t)
    return out


def format_instance(g: AffinityGraph, blocks: Partition) -> str:
    """Plain-text dump of one solved instance."""
    lines = ["nodes:"]
    lines += [f"  {i}: det {d.det_id} frame {d.frame} box {d.box}" for i, d in enumerate(g.nodes)]
    lines.append("weights:")
    for i in range(len(g)):
        cells = ["   X  " if not g.allowed[i, j] else f"{g.weight[i, j]:6.3f}" for j in range(len(g))]
        lines.append("  " + " ".join(cells))
    lines.append("partition: " + " | ".join(" ".join(str(g.nodes[i].det_id) for i in b) for b in blocks))
    lines.append(f"objective: {partition_objective(g, blocks):.6f}")
    return "\n".join(lines) + "\n"
