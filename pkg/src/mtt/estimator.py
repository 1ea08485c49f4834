"""scikit-learn style front ends for tracklet generation and full tracking."""

from __future__ import annotations

import concurrent.futures
import os
import time
from dataclasses import dataclass, field

from sklearn.base import BaseEstimator, TransformerMixin

from .association import assemble_tracks, association_round
from .cluster import (
    cluster_debug_rows,
    cluster_groups,
    dbscan,
    pixel_distance_matrix,
    prefilter,
    weighted_distance_matrix,
)
from .core import EmbeddingTable, FinalTrack, FrameSet, Tracklet
from .metrics import clear_mot
from .partition import CountCurve, Subsequence, partition_adaptive, partition_fixed
from .tracker import TrackletTracker, tracklet_feature
from .tracklets import (
    edge_weights,
    format_instance,
    solve_clique_partition,
    tracklets_from_partition,
)
from .validation import check_config, check_embeddings, check_frameset, parse_mode


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("MTT_THREADS", "1")))
    except ValueError:
        return 1


@dataclass
class RoundResult:
    subsequence: Subsequence
    tracklets: list[Tracklet]
    n_filtered: int
    n_clusters: int
    debug_rows: list[str] = field(default_factory=list)
    instances: list[str] = field(default_factory=list)


def make_subsequences(frames: FrameSet, cfg, mode: str = "adaptive") -> tuple[CountCurve, list[Subsequence]]:
    kind, length = parse_mode(mode)
    curve = CountCurve.from_counts(frames.counts(), cfg.median_window)
    if kind == "adaptive":
        subs = partition_adaptive(curve, cfg)
    elif kind == "fixed":
        subs = partition_fixed(len(frames), length, length, curve.raw)
    else:
        subs = partition_fixed(len(frames), length, min(cfg.stride, length), curve.raw)
    return curve, subs


class TrackletGenerator(TransformerMixin, BaseEstimator):
    """Turn the detections of one subsequence into tracklets.

    Detections are score/NMS filtered, density clustered, and each cluster
    is split into tracklets by exact clique partitioning.
    """

    def __init__(self, config=None, debug: bool = False):
        self.config = config
        self.debug = debug

    def fit(self, X=None, y=None):
        self.config_ = check_config(self.config)
        return self

    def transform(self, X, embeddings: EmbeddingTable | None = None, subsequence: Subsequence | None = None,
                  after: int = 0, next_id: int = 0) -> RoundResult:
        """Tracklets for ``X`` (detections of one subsequence).

        Only members on frames later than ``after`` are emitted; earlier
        frames still inform the partition (used by the sliding-window mode).
        """
        cfg = getattr(self, "config_", None) or check_config(self.config)
        dets = prefilter(list(X), cfg.min_score, cfg.nms_iou)
        if subsequence is None and dets:
            subsequence = Subsequence(min(d.frame for d in dets), max(d.frame for d in dets))
        if not dets:
            return RoundResult(subsequence, [], 0, 0)
        if cfg.cluster_metric == "weighted" and embeddings is not None:
            dm, _ = weighted_distance_matrix(dets, embeddings, cfg.alpha, cfg.beta, cfg.diagonal)
            labels = dbscan(dm, cfg.weighted_eps, cfg.min_samples)
        else:
            labels = dbscan(pixel_distance_matrix(dets), cfg.eps, cfg.min_samples)
        groups = cluster_groups(labels)

        def solve(group):
            g = edge_weights([dets[i] for i in group], embeddings, cfg)
            return g, solve_clique_partition(g, cfg.budget, cfg.greedy_fallback)

        workers = worker_count()
        if workers > 1 and len(groups) > 1:
            with concurrent.futures.ThreadPoolExecutor(workers) as pool:
                solved = list(pool.map(solve, groups))
        else:
            solved = [solve(gr) for gr in groups]

        tracklets: list[Tracklet] = []
        instances = []
        for g, blocks in solved:
            for t in tracklets_from_partition(g, blocks, subsequence):
                members = {f: d for f, d in t.members.items() if f > after}
                if members:
                    tracklets.append(Tracklet(0, members))
            if self.debug:
                instances.append(format_instance(g, blocks))
        tracklets.sort(key=lambda t: min(t.det_ids))
        for k, t in enumerate(tracklets):
            t.id = next_id + k
            t.feature = tracklet_feature(t, embeddings)
        rows = cluster_debug_rows(dets, labels) if self.debug else []
        return RoundResult(subsequence, tracklets, len(dets), len(groups), rows, instances)


class MultiTrackletTracker(BaseEstimator):
    """Multi-tracklet tracker over a whole detection sequence.

    Parameters
    ----------
    config : Config, dict or None
        Tracker parameters; ``None`` uses the defaults.
    mode : str
        ``"adaptive"``, ``"fixed:L"`` or ``"sliding:L"`` sequence partitioning.
    log_events : bool
        Record one line per spawned, attached or dummy node in ``events_``.

    Attributes
    ----------
    tracks_ : list of FinalTrack
    manifest_ : dict
        Counts and per-stage timings of the last fit.
    diagnostics_ : list of dict
        One entry per association round.
    """

    def __init__(self, config=None, mode: str = "adaptive", log_events: bool = False):
        self.config = config
        self.mode = mode
        self.log_events = log_events

    def fit(self, X, y=None, embeddings: EmbeddingTable | None = None):
        frames = check_frameset(X)
        emb = check_embeddings(embeddings, frames)
        cfg = check_config(self.config)
        kind, _ = parse_mode(self.mode)
        timings = {"partition": 0.0, "tracklets": 0.0, "tracking": 0.0, "association": 0.0, "output": 0.0}

        t0 = time.perf_counter()
        curve, subs = make_subsequences(frames, cfg, self.mode)
        timings["partition"] += time.perf_counter() - t0

        generator = TrackletGenerator(cfg).fit()
        tracker = TrackletTracker(cfg, emb, self.log_events)
        diagnostics = []
        counts = {"subsequences": len(subs), "filtered_detections": 0, "clusters": 0, "tracklets": 0}
        consumed = 0
        for sub in subs:
            t0 = time.perf_counter()
            after = consumed if kind == "sliding" else 0
            result = generator.transform(
                frames.detections(sub.first, sub.last), emb, sub, after=after, next_id=counts["tracklets"]
            )
            if kind == "sliding":
                counts["filtered_detections"] += len(prefilter(
                    frames.detections(max(consumed + 1, sub.first), sub.last), cfg.min_score, cfg.nms_iou))
            else:
                counts["filtered_detections"] += result.n_filtered
            counts["clusters"] += result.n_clusters
            counts["tracklets"] += len(result.tracklets)
            consumed = max(consumed, sub.last)
            timings["tracklets"] += time.perf_counter() - t0

            t0 = time.perf_counter()
            tracker.advance(result.tracklets)
            timings["tracking"] += time.perf_counter() - t0

            t0 = time.perf_counter()
            diagnostics.append(association_round(tracker))
            timings["association"] += time.perf_counter() - t0

        t0 = time.perf_counter()
        if tracker.trees:
            diagnostics.append(association_round(tracker, final=True))
        self.tracks_ = assemble_tracks(tracker.retired, cfg)
        timings["output"] += time.perf_counter() - t0

        counts.update(
            trees=tracker.n_trees_spawned,
            hypotheses=tracker.n_hypotheses,
            final_tracks=len(self.tracks_),
            output_rows=sum(len(t.boxes) for t in self.tracks_),
        )
        self.config_ = cfg
        self.n_frames_ = len(frames)
        self.diagnostics_ = diagnostics
        self.events_ = tracker.events or []
        self.manifest_ = {"config": cfg.to_dict(), "mode": self.mode, "counts": counts, "timings": timings}
        return self

    def predict(self, X, embeddings: EmbeddingTable | None = None) -> list[FinalTrack]:
        """Track ``X`` and return the final tracks."""
        return self.fit(X, embeddings=embeddings).tracks_

    fit_predict = predict

    def score(self, X, y, embeddings: EmbeddingTable | None = None) -> float:
        """MOTA of the tracks for ``X`` against ground truth ``y``."""
        return clear_mot(y, self.predict(X, embeddings=embeddings)).MOTA
