"""Shared builders for random instances used by several test modules."""

from __future__ import annotations

import numpy as np
import pytest

from mtt import Config
from mtt.association import ConflictGraph
from mtt.core import Detection, EmbeddingTable
from mtt.tracklets import edge_weights


def random_cluster(rng: np.random.Generator, max_nodes: int = 10) -> tuple[list[Detection], EmbeddingTable]:
    """A cluster of <= max_nodes detections over 2-4 frames with a few identities."""
    n_frames = int(rng.integers(2, 5))
    n = int(rng.integers(1, max_nodes + 1))
    n_ids = int(rng.integers(1, 4))
    dim = 8
    means = [v / np.linalg.norm(v) for v in rng.standard_normal((n_ids, dim))]
    origins = rng.uniform(0, 120, (n_ids, 2))
    dets, emb = [], EmbeddingTable(dim=dim)
    for k in range(n):
        ident = int(rng.integers(n_ids))
        frame = int(rng.integers(1, n_frames + 1))
        cx, cy = origins[ident] + rng.normal(0, 15, 2) + frame * 5.0
        w = float(rng.uniform(30, 60))
        dets.append(Detection(frame, (cx - w / 2, cy - w, w, 2 * w), float(rng.uniform(0.2, 1.0)), k))
        emb.add(k, means[ident] + rng.normal(0, 0.15, dim))
    return dets, emb


def random_affinity_graph(seed: int, max_nodes: int = 10):
    rng = np.random.default_rng(seed)
    dets, emb = random_cluster(rng, max_nodes)
    return edge_weights(dets, emb, Config())


def random_conflict_graph(seed: int, max_nodes: int = 15) -> ConflictGraph:
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, max_nodes + 1))
    density = rng.uniform(0.1, 0.6)
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < density]
    weights = rng.uniform(0.0, 10.0, n)
    weights[weights == 0.0] = 1e-3
    return ConflictGraph.from_edges(weights, edges)


@pytest.fixture
def cfg() -> Config:
    return Config()


# acceptance verdicts, one line per criterion, echoed in the terminal summary
ACCEPTANCE: list[str] = []


def record(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title} ({detail})"
    ACCEPTANCE.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
