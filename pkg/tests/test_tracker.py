import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mtt import Config, Detection, EmbeddingTable, Tracklet
from mtt.tracker import (
    DUMMY,
    TRACKLET,
    HypothesisScore,
    TrackletTracker,
    advance,
    appearance_gate,
    dummy_score,
    motion_gate,
    score_appearance,
    score_confidence,
    score_motion,
    score_total,
    tracklet_feature,
)


def make_tracklet(tid, rows):
    """rows: (frame, cx, cy, score, det_id)"""
    members = {f: Detection(f, (cx - 20, cy - 40, 40, 80), s, d) for f, cx, cy, s, d in rows}
    return Tracklet(tid, members)


# -- scores -----------------------------------------------------------------

def test_score_spot_values():
    assert score_appearance(0.0, 0.3) == pytest.approx(-math.log(2) + math.log(1 / 0.3), abs=1e-12)
    assert score_appearance(0.0, 0.3) == pytest.approx(0.5108, abs=1e-3)
    assert score_appearance(1.0, 0.3) == pytest.approx(1.0770, abs=1e-3)
    assert score_confidence(0.1, 0.1) == 0.0
    assert score_confidence(1.0, 0.1) == pytest.approx(0.7163, abs=1e-3)
    assert score_confidence(0.0, 0.1) == pytest.approx(-0.0997, abs=1e-3)
    assert score_total((1, 1, 1), (0.1, 0.9, 3.0)) == 4.0
    assert score_total((0, 0, 0), Config()) == 0.0


def test_motion_score():
    assert score_motion(0.0, np.eye(4), 2 * math.pi) == pytest.approx(0.0, abs=1e-12)
    assert score_motion(0.0, np.eye(4), 1920 * 1080) == pytest.approx(12.707, abs=1e-3)
    # larger innovation covariance lowers the score
    assert score_motion(0.0, 4 * np.eye(4), 100.0) < score_motion(0.0, np.eye(4), 100.0)


def test_appearance_score_increases_with_similarity():
    xs = np.linspace(-1, 1, 21)
    vals = [score_appearance(x, 0.3) for x in xs]
    assert all(a < b for a, b in zip(vals, vals[1:]))


@settings(max_examples=100)
@given(st.tuples(*[st.floats(-50, 50)] * 3), st.floats(0.01, 100))
def test_total_score_linear_in_weights(components, lam):
    w = (0.1, 0.9, 3.0)
    scaled = tuple(lam * x for x in w)
    assert score_total(components, scaled) == pytest.approx(lam * score_total(components, w), rel=1e-9, abs=1e-9)


def test_hypothesis_score_total_is_weighted_sum():
    c = Config()
    h = HypothesisScore.combine(1.5, -0.25, 0.7, c)
    assert h.s_total == c.w_motion * 1.5 + c.w_appearance * -0.25 + c.w_confidence * 0.7


def test_continuation_property():
    c = Config()
    near = score_total((score_motion(0.0, np.eye(4), c.observation_volume), score_appearance(1.0, 0.3),
                        score_confidence(1.0, 0.1)), c)
    far = score_total((score_motion(15.0, np.eye(4), 2 * math.pi), score_appearance(0.0, 0.3),
                       score_confidence(0.0, 0.1)), c)
    assert near > 0 > far


def test_dummy_chain_strictly_decreasing():
    c = Config()
    cum = np.cumsum([dummy_score(m, c) for m in range(1, c.patience + 1)])
    assert dummy_score(1, c) < 0
    assert np.all(np.diff(cum) < 0)


# -- gates -------------------------------------------------------------------

def test_motion_gate_examples():
    ok, d = motion_gate(np.zeros(4), np.eye(4), 15.0)
    assert ok and d == 0.0
    ok, d = motion_gate(np.array([4.0, 0, 0, 0]), np.eye(4), 15.0)
    assert not ok and d == pytest.approx(16.0)
    _, d4 = motion_gate(np.array([4.0, 0, 0, 0]), 4 * np.eye(4), 15.0)
    assert d4 == pytest.approx(4.0)


def test_motion_gate_singular_fails_closed():
    ok, d = motion_gate(np.ones(4), np.zeros((4, 4)), 15.0)
    assert not ok and d == math.inf


def test_appearance_gate_examples():
    e1, e2 = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    assert appearance_gate(e1, e1, 0.85) == (True, pytest.approx(1.0))
    assert appearance_gate(e1, e2, 0.85)[0] is False
    a = math.radians(20)
    ok, d = appearance_gate(e1, np.array([math.cos(a), math.sin(a)]), 0.85)
    assert ok and d == pytest.approx(0.9397, abs=1e-4)
    assert appearance_gate(e1, np.zeros(2), 0.85) == (True, None)
    assert appearance_gate(None, e1, 0.85) == (True, None)


def test_tracklet_feature_examples():
    e1, e2 = np.eye(2)
    t = make_tracklet(0, [(1, 0, 0, 0.2, 0), (2, 0, 0, 0.8, 1)])
    np.testing.assert_allclose(tracklet_feature(t, EmbeddingTable({0: e1, 1: e1})), e1)
    expected = (0.2 * e1 + 0.8 * e2) / np.linalg.norm(0.2 * e1 + 0.8 * e2)
    np.testing.assert_allclose(tracklet_feature(t, EmbeddingTable({0: e1, 1: e2})), expected)
    single = make_tracklet(1, [(1, 0, 0, 0.5, 0)])
    np.testing.assert_allclose(tracklet_feature(single, EmbeddingTable({0: e2})), e2)
    assert tracklet_feature(t, EmbeddingTable(dim=2)) is None


# -- tree growth -------------------------------------------------------------

def test_spawn_one_tree_per_tracklet():
    tr = TrackletTracker(Config())
    ts = [make_tracklet(k, [(1, 100 * k, 0, 0.9, k)]) for k in range(3)]
    trees = tr.advance(ts)
    assert len(trees) == 3 and all(len(t.leaves) == 1 for t in trees)
    assert advance([], ts, Config())[0].root.tracklet is ts[0]


def test_gated_out_leaf_gets_single_dummy():
    tr = TrackletTracker(Config())
    tr.advance([make_tracklet(0, [(1, 0, 0, 0.9, 0), (2, 0, 0, 0.9, 1)])])
    tree = tr.trees[0]
    tr.advance([make_tracklet(1, [(3, 900, 500, 0.9, 2)])])
    assert [c.kind for c in tree.root.children] == [DUMMY]
    assert tree.leaves[0].miss_count == 1


def test_close_tracklet_attaches():
    tr = TrackletTracker(Config())
    tr.advance([make_tracklet(0, [(1, 0, 0, 0.9, 0), (2, 2, 0, 0.9, 1)])])
    tree = tr.trees[0]
    tr.advance([make_tracklet(1, [(3, 4, 0, 0.9, 2)])])
    kinds = sorted(c.kind for c in tree.root.children)
    assert kinds == [DUMMY, TRACKLET]
    child = next(c for c in tree.root.children if c.kind == TRACKLET)
    assert child.cum_score == pytest.approx(tree.root.cum_score + child.score.s_total)
    assert child.path_det_ids == {0, 1, 2}


def test_patience_exhausted_removes_leaf():
    cfg = Config()
    tr = TrackletTracker(cfg)
    tr.advance([make_tracklet(0, [(1, 0, 0, 0.9, 0)])])
    tree = tr.trees[0]
    for _ in range(cfg.patience):
        tr.advance([])
    assert tree.leaves[0].miss_count == cfg.patience
    tr.advance([])
    assert tree not in tr.trees and tree.leaves == []


def test_appearance_gate_blocks_attach():
    emb = EmbeddingTable({0: [1, 0], 1: [0, 1]})
    tr = TrackletTracker(Config(), emb)
    tr.advance([make_tracklet(0, [(1, 0, 0, 0.9, 0)])])
    tr.advance([make_tracklet(1, [(2, 0, 0, 0.9, 1)])])
    assert all(c.kind == DUMMY for c in tr.trees[0].root.children)


def random_rounds(seed, n_rounds=6):
    rng = np.random.default_rng(seed)
    rounds, det_id, frame = [], 0, 1
    starts = rng.uniform(0, 200, (4, 2))
    for _ in range(n_rounds):
        batch = []
        for k in range(int(rng.integers(1, 5))):
            rows = []
            cx, cy = starts[k % 4] + frame * 2.0 + rng.normal(0, 3, 2)
            for f in range(frame, frame + int(rng.integers(1, 3))):
                rows.append((f, cx, cy, float(rng.uniform(0.2, 1)), det_id))
                det_id += 1
            batch.append(make_tracklet(det_id, rows))
        rounds.append(batch)
        frame += 2
    return rounds


@pytest.mark.parametrize("seed", range(15))
def test_tree_invariants(seed):
    cfg = Config(max_leaves=3)
    tr = TrackletTracker(cfg)
    for batch in random_rounds(seed):
        tr.advance(batch)
        for tree in tr.trees:
            assert len(tree.leaves) <= cfg.max_leaves
            for leaf in tree.leaves:
                path = leaf.path()
                assert path[0] is tree.root
                assert leaf.miss_count <= cfg.patience
                tracklets = [n.tracklet for n in path if n.tracklet is not None]
                for a, b in zip(tracklets, tracklets[1:]):
                    assert a.end < b.start
                ids = [i for t in tracklets for i in t.det_ids]
                assert len(ids) == len(set(ids))
                for node in path:
                    if node.kind == DUMMY:
                        assert node.tracklet is None
                        assert node.feature is node.parent.feature
                    if node.kind == TRACKLET:
                        # re-running the gates on the stored pair must accept it
                        assert tr.try_attach(node.parent, node.tracklet) is not None


def test_leaf_ranking_invariant_under_weight_scaling():
    base = Config()
    scaled = Config(w_motion=0.2, w_appearance=1.8, w_confidence=6.0, miss_penalty=0.6)

    def best_leaf(cfg):
        tr = TrackletTracker(cfg)
        for batch in random_rounds(3):
            tr.advance(batch)
        tree = max(tr.trees, key=lambda t: len(t.leaves))
        return [n.serial for n in max(tree.leaves, key=lambda n: (n.cum_score, -n.serial)).path()]

    assert best_leaf(base) == best_leaf(scaled)
