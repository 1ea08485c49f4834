"""Input checks shared by the estimators and the CLI."""

from __future__ import annotations

import numpy as np

from .config import Config
from .core import Detection, EmbeddingTable, FrameSet


def check_frameset(X) -> FrameSet:
    """Coerce ``X`` to a FrameSet.

    Accepts a FrameSet, an iterable of Detection, or an (n, 6) array of
    ``frame, x, y, w, h, score`` rows (det_ids follow row order).
    """
    if isinstance(X, FrameSet):
        return X
    if isinstance(X, np.ndarray) or (isinstance(X, (list, tuple)) and X and not isinstance(X[0], Detection)):
        arr = np.asarray(X, dtype=float)
        if arr.size == 0:
            return FrameSet()
        if arr.ndim != 2 or arr.shape[1] != 6:
            raise ValueError(f"expected an (n, 6) array of frame,x,y,w,h,score; got shape {arr.shape}")
        check_boxes(arr[:, 1:5])
        return FrameSet(
            Detection(int(r[0]), (r[1], r[2], r[3], r[4]), float(r[5]), i) for i, r in enumerate(arr)
        )
    dets = list(X)
    if not all(isinstance(d, Detection) for d in dets):
        raise TypeError("expected a FrameSet, Detections or an (n, 6) array")
    return FrameSet(dets)


def check_boxes(boxes) -> np.ndarray:
    arr = np.asarray(boxes, dtype=float).reshape(-1, 4)
    if not np.all(np.isfinite(arr)):
        raise ValueError("boxes contain non-finite values")
    if np.any(arr[:, 2:] <= 0):
        raise ValueError("boxes must have positive width and height")
    return arr


def check_embeddings(emb, frames: FrameSet) -> EmbeddingTable | None:
    if emb is None:
        return None
    if not isinstance(emb, EmbeddingTable):
        raise TypeError(f"expected an EmbeddingTable, got {type(emb).__name__}")
    unknown = [k for k, _ in emb.items() if frames.get(k) is None]
    if unknown:
        raise ValueError(f"embeddings for unknown det_ids, e.g. {unknown[:5]}")
    return emb


def check_config(config) -> Config:
    if config is None:
        return Config()
    if isinstance(config, Config):
        return config
    if isinstance(config, dict):
        return Config(**config)
    raise TypeError(f"expected Config or dict, got {type(config).__name__}")


def parse_mode(mode: str) -> tuple[str, int | None]:
    """``adaptive``, ``fixed:L`` or ``sliding:L`` -> (kind, L)."""
    if mode == "adaptive":
        return "adaptive", None
    kind, _, length = mode.partition(":")
    if kind not in ("fixed", "sliding") or not length.isdigit() or int(length) < 1:
        raise ValueError(f"mode must be adaptive, fixed:L or sliding:L; got {mode!r}")
    return kind, int(length)
