"""Detections, embeddings, tracklets and the MOT-style CSV formats."""

from __future__ import annotations

import csv
import io
import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class ParseError(ValueError):
    """Malformed input file; the message names the offending line."""


@dataclass(frozen=True)
class Detection:
    frame: int
    box: tuple[float, float, float, float]  # top-left x, y, width, height
    score: float
    det_id: int

    def __post_init__(self):
        if self.frame < 1:
            raise ValueError(f"frame must be >= 1, got {self.frame}")
        if not (self.box[2] > 0 and self.box[3] > 0):
            raise ValueError(f"non-positive box {self.box}")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score outside [0, 1]: {self.score}")

    @property
    def center(self) -> tuple[float, float]:
        x, y, w, h = self.box
        return (x + w / 2.0, y + h / 2.0)

    @property
    def width(self) -> float:
        return self.box[2]


class FrameSet:
    """Detections grouped by frame, frames 1..N (empty frames allowed)."""

    def __init__(self, detections: Iterable[Detection] = (), n_frames: int | None = None):
        dets = sorted(detections, key=lambda d: (d.frame, d.det_id))
        ids = [d.det_id for d in dets]
        if len(set(ids)) != len(ids):
            raise ValueError("det_id values must be unique within a sequence")
        last = dets[-1].frame if dets else 0
        self.n_frames = max(last, n_frames or 0)
        self._frames: list[list[Detection]] = [[] for _ in range(self.n_frames)]
        for d in dets:
            self._frames[d.frame - 1].append(d)
        self._by_id = {d.det_id: d for d in dets}

    def __len__(self) -> int:
        return self.n_frames

    def __getitem__(self, frame: int) -> list[Detection]:
        if not 1 <= frame <= self.n_frames:
            raise IndexError(f"frame {frame} outside 1..{self.n_frames}")
        return list(self._frames[frame - 1])

    def __iter__(self):
        return iter(self.detections())

    def detections(self, first: int = 1, last: int | None = None) -> list[Detection]:
        last = self.n_frames if last is None else last
        out: list[Detection] = []
        for t in range(max(first, 1), min(last, self.n_frames) + 1):
            out.extend(self._frames[t - 1])
        return out

    def counts(self) -> list[int]:
        return [len(f) for f in self._frames]

    def get(self, det_id: int) -> Detection | None:
        return self._by_id.get(det_id)

    @property
    def n_detections(self) -> int:
        return len(self._by_id)


class EmbeddingTable:
    """Unit-normalized appearance vectors keyed by det_id."""

    def __init__(self, vectors: Mapping[int, np.ndarray] | None = None, dim: int | None = None):
        self._vectors: dict[int, np.ndarray] = {}
        self.dim = dim
        for det_id, vec in (vectors or {}).items():
            self.add(det_id, vec)

    def add(self, det_id: int, vec) -> None:
        v = np.asarray(vec, dtype=float).ravel()
        if self.dim is None:
            self.dim = v.size
        if v.size != self.dim:
            raise ValueError(f"dimension mismatch for det_id {det_id}: {v.size} != {self.dim}")
        if not np.all(np.isfinite(v)):
            raise ValueError(f"non-finite embedding for det_id {det_id}")
        norm = np.linalg.norm(v)
        if norm == 0:
            raise ValueError(f"zero embedding for det_id {det_id}")
        v = v / norm
        v.setflags(write=False)
        self._vectors[det_id] = v

    def get(self, det_id: int) -> np.ndarray | None:
        return self._vectors.get(det_id)

    def __contains__(self, det_id: int) -> bool:
        return det_id in self._vectors

    def __len__(self) -> int:
        return len(self._vectors)

    def items(self):
        return sorted(self._vectors.items())


@dataclass(eq=False)
class Tracklet:
    """Identity-consistent detections over a short interval, at most one per frame.

    Treated by the tracker as a single observation spanning ``interval``.
    """

    id: int
    members: dict[int, Detection]  # frame -> detection
    feature: np.ndarray | None = None

    def __post_init__(self):
        if not self.members:
            raise ValueError("tracklet needs at least one member")
        for frame, det in self.members.items():
            if det.frame != frame:
                raise ValueError("member keyed under the wrong frame")
        self.members = dict(sorted(self.members.items()))

    @property
    def interval(self) -> tuple[int, int]:
        frames = list(self.members)
        return frames[0], frames[-1]

    @property
    def start(self) -> int:
        return self.interval[0]

    @property
    def end(self) -> int:
        return self.interval[1]

    @property
    def det_ids(self) -> frozenset[int]:
        return frozenset(d.det_id for d in self.members.values())

    @property
    def detections(self) -> list[Detection]:
        return list(self.members.values())

    @property
    def mean_score(self) -> float:
        return float(np.mean([d.score for d in self.members.values()]))

    def __len__(self) -> int:
        return len(self.members)


@dataclass
class FinalTrack:
    track_id: int
    boxes: dict[int, tuple[float, float, float, float]]  # frame -> box
    scores: dict[int, float] = field(default_factory=dict)
    det_ids: list[int] = field(default_factory=list)
    interpolated: set[int] = field(default_factory=set)

    @property
    def frames(self) -> list[int]:
        return sorted(self.boxes)


# ---------------------------------------------------------------------------
# file formats

def _fmt(v: float) -> str:
    return f"{v:.6f}"


def _read_rows(path: str | Path):
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
                continue
            yield lineno, [c.strip() for c in row]


def parse_detections(path: str | Path, format: str = "mot-csv") -> FrameSet:
    """Read ``frame,track_id,x,y,w,h,score`` rows; extra columns are ignored.

    det_ids are assigned in file order starting at 0.
    """
    if format != "mot-csv":
        raise ValueError(f"unsupported detection format {format!r}")
    dets = []
    for lineno, row in _read_rows(path):
        if len(row) < 7:
            raise ParseError(f"expected at least 7 columns at line {lineno}")
        try:
            frame = int(float(row[0]))
            x, y, w, h, score = (float(c) for c in row[2:7])
        except ValueError as exc:
            raise ParseError(f"malformed number at line {lineno}") from exc
        if not all(math.isfinite(v) for v in (x, y, w, h, score)):
            raise ParseError(f"non-finite value at line {lineno}")
        if w <= 0 or h <= 0:
            raise ParseError(f"non-positive box at line {lineno}")
        if frame < 1:
            raise ParseError(f"frame must be >= 1 at line {lineno}")
        if not 0.0 <= score <= 1.0:
            raise ParseError(f"score outside [0, 1] at line {lineno}")
        dets.append(Detection(frame, (x, y, w, h), score, len(dets)))
    return FrameSet(dets)


def parse_embeddings(path: str | Path, expected: FrameSet | None = None) -> EmbeddingTable:
    """Read ``det_id,v1,...,vD`` rows into a normalized table.

    Rows for det_ids absent from ``expected`` are rejected; det_ids without
    a row are simply missing from the table.
    """
    table = EmbeddingTable()
    for lineno, row in _read_rows(path):
        try:
            det_id = int(row[0])
            vec = np.array([float(c) for c in row[1:]])
        except ValueError as exc:
            raise ParseError(f"malformed number at line {lineno}") from exc
        if vec.size == 0:
            raise ParseError(f"empty embedding at line {lineno}")
        if expected is not None and expected.get(det_id) is None:
            raise ParseError(f"unknown det_id {det_id} at line {lineno}")
        try:
            table.add(det_id, vec)
        except ValueError as exc:
            raise ParseError(f"{exc} at line {lineno}") from exc
    return table


def format_detections(frames: FrameSet) -> str:
    buf = io.StringIO()
    for d in frames.detections():
        buf.write(f"{d.frame},-1,{','.join(_fmt(v) for v in d.box)},{_fmt(d.score)}\n")
    return buf.getvalue()


def write_detections(frames: FrameSet, path: str | Path) -> None:
    Path(path).write_text(format_detections(frames))


def write_embeddings(table: EmbeddingTable, path: str | Path) -> None:
    lines = (f"{k}," + ",".join(f"{x:.8f}" for x in v) + "\n" for k, v in table.items())
    Path(path).write_text("".join(lines))


def format_tracks(tracks: Iterable[FinalTrack]) -> str:
    rows = []
    for tr in tracks:
        for frame, box in tr.boxes.items():
            rows.append((frame, tr.track_id, box, tr.scores.get(frame, 1.0)))
    rows.sort(key=lambda r: (r[0], r[1]))
    return "".join(
        f"{f},{tid},{','.join(_fmt(v) for v in box)},{_fmt(s)},-1,-1,-1\n" for f, tid, box, s in rows
    )


def write_tracks(tracks: Iterable[FinalTrack], path: str | Path) -> None:
    """Write MOT rows ``frame,id,x,y,w,h,score,-1,-1,-1`` sorted by (frame, id)."""
    Path(path).write_text(format_tracks(tracks))


def read_tracks(path: str | Path) -> list[FinalTrack]:
    """Read a MOT track or ground-truth file into per-id tracks."""
    by_id: dict[int, FinalTrack] = {}
    for lineno, row in _read_rows(path):
        if len(row) < 6:
            raise ParseError(f"expected at least 6 columns at line {lineno}")
        try:
            frame, tid = int(float(row[0])), int(float(row[1]))
            box = tuple(float(c) for c in row[2:6])
            score = float(row[6]) if len(row) > 6 else 1.0
        except ValueError as exc:
            raise ParseError(f"malformed number at line {lineno}") from exc
        tr = by_id.setdefault(tid, FinalTrack(tid, {}))
        tr.boxes[frame] = box
        tr.scores[frame] = score
    return [by_id[k] for k in sorted(by_id)]
