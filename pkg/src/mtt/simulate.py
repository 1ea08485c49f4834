"""Synthetic scenes with known ground truth and a corrupted detector.

Targets move with constant velocity plus small acceleration noise. The
detector misses targets, fires on background, reports low confidence around
occlusions and loses targets entirely while they are occluded. Appearance
vectors are a per-identity unit mean perturbed by an angular noise.

Randomness comes from ``numpy.random.default_rng(seed)`` (PCG64), drawn in a
fixed order, so a given spec always produces the same files.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .cluster import iou_matrix
from .core import Detection, EmbeddingTable, FinalTrack, FrameSet


@dataclass(frozen=True)
class SceneSpec:
    seed: int = 0
    n_targets: int = 10
    n_frames: int = 200
    image_width: int = 1920
    image_height: int = 1080
    birth_rate: float = 0.0
    death_rate: float = 0.0
    miss_rate: float = 0.1
    fp_rate: float = 0.05
    # explicit [target, start_frame, duration] triples; random ones are added on top
    occlusions: tuple = ()
    n_occlusions: int = 5
    occlusion_min: int = 3
    occlusion_max: int = 8
    partial_frames: int = 2
    box_width: tuple = (40.0, 80.0)
    aspect: tuple = (1.0, 2.0)
    max_speed: float = 4.0
    accel_noise: float = 0.02
    jitter: float = 1.0
    conf_visible: float = 0.8
    conf_partial: float = 0.3
    conf_fp: float = 0.25
    conf_std: float = 0.1
    embedding_dim: int = 64
    sigma_emb: float = 15.0  # degrees

    def __post_init__(self):
        for name in ("birth_rate", "death_rate", "miss_rate", "fp_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.n_targets < 0 or self.n_frames < 0:
            raise ValueError("n_targets and n_frames must be >= 0")
        if self.occlusion_min < 1 or self.occlusion_max < self.occlusion_min:
            raise ValueError("occlusion durations must satisfy 1 <= min <= max")
        for occ in self.occlusions:
            if len(occ) != 3 or occ[2] < 1:
                raise ValueError(f"bad occlusion {occ!r}; expected [target, start, duration>=1]")
        if self.embedding_dim < 2:
            raise ValueError("embedding_dim must be >= 2")

    @classmethod
    def from_dict(cls, data: dict) -> SceneSpec:
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown scene keys: {sorted(unknown)}")
        data = dict(data)
        for key in ("box_width", "aspect"):
            if key in data:
                data[key] = tuple(data[key])
        if "occlusions" in data:
            data["occlusions"] = tuple(tuple(int(v) for v in o) for o in data["occlusions"])
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path) -> SceneSpec:
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


@dataclass
class SceneTruth:
    boxes: dict[int, dict[int, tuple]]  # identity -> frame -> box
    visible: dict[int, dict[int, bool]]
    det_identity: dict[int, int] = field(default_factory=dict)  # det_id -> identity, -1 for clutter
    occlusions: list[tuple[int, int, int]] = field(default_factory=list)

    def tracks(self) -> list[FinalTrack]:
        return [FinalTrack(i, dict(self.boxes[i])) for i in sorted(self.boxes)]

    @property
    def n_boxes(self) -> int:
        return sum(len(b) for b in self.boxes.values())


def _unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def perturb_embedding(mean: np.ndarray, sigma_deg: float, rng: np.random.Generator) -> np.ndarray:
    """Unit vector about ``sigma_deg`` degrees away from ``mean`` in a random direction."""
    dim = mean.size
    noise = rng.standard_normal(dim)
    noise -= (noise @ mean) * mean
    noise *= math.tan(math.radians(sigma_deg)) / math.sqrt(dim - 1)
    v = mean + noise
    return v / np.linalg.norm(v)


def _trajectory(spec: SceneSpec, rng: np.random.Generator, start: int, end: int) -> dict[int, tuple]:
    W, H = spec.image_width, spec.image_height
    w = rng.uniform(*spec.box_width)
    h = w * rng.uniform(*spec.aspect)
    mx, my = w, h
    p0 = np.array([rng.uniform(mx, W - mx), rng.uniform(my, H - my)])
    p1 = np.array([rng.uniform(mx, W - mx), rng.uniform(my, H - my)])
    length = max(end - start, 1)
    vel = (p1 - p0) / length
    speed = np.linalg.norm(vel)
    if speed > spec.max_speed:
        vel *= spec.max_speed / speed
    pos = p0.copy()
    out = {}
    for t in range(start, end + 1):
        cx = min(max(pos[0], w / 2), W - w / 2)
        cy = min(max(pos[1], h / 2), H - h / 2)
        out[t] = (cx - w / 2, cy - h / 2, w, h)
        vel = vel + rng.normal(0.0, spec.accel_noise, 2)
        pos = pos + vel
    return out


def generate(spec: SceneSpec) -> tuple[SceneTruth, FrameSet, EmbeddingTable]:
    rng = np.random.default_rng(spec.seed)
    N = spec.n_frames
    boxes: dict[int, dict[int, tuple]] = {}
    means: dict[int, np.ndarray] = {}
    for i in range(1, spec.n_targets + 1):
        start, end = 1, N
        if N > 2 and rng.random() < spec.birth_rate:
            start = int(rng.integers(1, N // 2 + 1))
        if N > 2 and rng.random() < spec.death_rate:
            end = int(rng.integers(max(N // 2, start), N + 1))
        boxes[i] = _trajectory(spec, rng, start, end) if N > 0 else {}
        means[i] = _unit(rng, spec.embedding_dim)

    occlusions = [tuple(o) for o in spec.occlusions]
    for _ in range(spec.n_occlusions if spec.n_targets and N else 0):
        target = int(rng.integers(1, spec.n_targets + 1))
        duration = int(rng.integers(spec.occlusion_min, spec.occlusion_max + 1))
        frames = sorted(boxes[target])
        lo = frames[0] + spec.partial_frames + 3
        hi = frames[-1] - duration - spec.partial_frames - 3
        if hi < lo:
            continue
        occlusions.append((target, int(rng.integers(lo, hi + 1)), duration))

    hidden: dict[int, set[int]] = {i: set() for i in boxes}
    partial: dict[int, set[int]] = {i: set() for i in boxes}
    for target, start, duration in occlusions:
        if target not in hidden:
            continue
        hidden[target].update(range(start, start + duration))
        for k in range(1, spec.partial_frames + 1):
            partial[target].update((start - k, start + duration - 1 + k))
    visible = {i: {t: t not in hidden[i] for t in boxes[i]} for i in boxes}

    dets: list[Detection] = []
    owners: list[int] = []
    vectors: list[np.ndarray] = []
    mean_fp = spec.fp_rate * spec.n_targets
    W, H = spec.image_width, spec.image_height
    for t in range(1, N + 1):
        frame_dets = []
        for i in sorted(boxes):
            if t not in boxes[i] or not visible[i][t]:
                continue
            if rng.random() < spec.miss_rate:
                continue
            x, y, w, h = boxes[i][t]
            j = rng.normal(0.0, spec.jitter, 4) if spec.jitter > 0 else np.zeros(4)
            box = (x + j[0], y + j[1], max(w + 0.5 * j[2], 1.0), max(h + 0.5 * j[3], 1.0))
            mu = spec.conf_partial if t in partial[i] else spec.conf_visible
            score = float(np.clip(rng.normal(mu, spec.conf_std), 0.01, 1.0))
            vec = perturb_embedding(means[i], spec.sigma_emb, rng)
            frame_dets.append((box, score, i, vec))
        for _ in range(int(rng.poisson(mean_fp)) if mean_fp > 0 else 0):
            w = rng.uniform(*spec.box_width)
            h = w * rng.uniform(*spec.aspect)
            box = (rng.uniform(0, W - w), rng.uniform(0, H - h), w, h)
            score = float(np.clip(rng.normal(spec.conf_fp, spec.conf_std), 0.01, 1.0))
            frame_dets.append((box, score, -1, _unit(rng, spec.embedding_dim)))
        for k in rng.permutation(len(frame_dets)):
            box, score, owner, vec = frame_dets[k]
            dets.append(Detection(t, tuple(float(v) for v in box), score, len(dets)))
            owners.append(owner)
            vectors.append(vec)

    frameset = FrameSet(dets, n_frames=N)
    table = EmbeddingTable(dim=spec.embedding_dim)
    for d, v in zip(dets, vectors):
        table.add(d.det_id, v)
    truth = SceneTruth(boxes, visible, {d.det_id: o for d, o in zip(dets, owners)}, occlusions)
    return truth, frameset, table


def format_ground_truth(truth: SceneTruth) -> str:
    rows = sorted((t, i, b) for i, frames in truth.boxes.items() for t, b in frames.items())
    return "".join(
        f"{t},{i},{','.join(f'{v:.6f}' for v in b)},1,1,{int(truth.visible[i][t])}\n" for t, i, b in rows
    )


def baseline_greedy_tracker(fs: FrameSet, iou_min: float = 0.5, min_score: float = 0.1) -> list[FinalTrack]:
    """Frame-to-frame greedy IoU linking; a track ends at its first unmatched frame."""
    tracks: dict[int, FinalTrack] = {}
    active: dict[int, tuple] = {}  # track id -> box in the previous frame
    next_id = 1
    for t in range(1, len(fs) + 1):
        dets = [d for d in fs[t] if d.score >= min_score]
        matched: dict[int, tuple] = {}
        if dets and active:
            ids = sorted(active)
            iou = iou_matrix(np.array([active[k] for k in ids]), np.array([d.box for d in dets]))
            pairs = sorted(
                ((iou[r, c], r, c) for r, c in zip(*np.nonzero(iou >= iou_min))),
                key=lambda p: (-p[0], p[1], p[2]),
            )
            used_r, used_c = set(), set()
            for _, r, c in pairs:
                if r in used_r or c in used_c:
                    continue
                used_r.add(r)
                used_c.add(c)
                tid = ids[r]
                tracks[tid].boxes[t] = dets[c].box
                tracks[tid].scores[t] = dets[c].score
                tracks[tid].det_ids.append(dets[c].det_id)
                matched[tid] = dets[c].box
        else:
            used_c = set()
        for c, d in enumerate(dets):
            if c in used_c:
                continue
            tracks[next_id] = FinalTrack(next_id, {t: d.box}, {t: d.score}, [d.det_id])
            matched[next_id] = d.box
            next_id += 1
        active = matched
    return [tracks[k] for k in sorted(tracks)]
