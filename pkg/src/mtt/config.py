"""Tracker configuration and the line-based ``key = value`` config file."""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, fields
from pathlib import Path

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Raised for invalid parameter values."""


@dataclass(frozen=True)
class Config:
    # -- image / observation space
    image_width: int = 1920
    image_height: int = 1080

    # -- sequence partitioning
    median_window: int = 5
    count_band: float = 5.0
    stride: int = 1
    max_window: int = 5
    max_window_detections: int = 70

    # -- detection filtering and clustering
    min_score: float = 0.1
    nms_iou: float = 0.5
    eps: float = 80.0
    min_samples: int = 2
    cluster_metric: str = "pixel"
    weighted_eps: float = 0.2
    alpha: float = 1.0
    beta: float = 1.0

    # -- tracklet generation
    sigma_pos: float | None = None  # None -> eps
    solver_budget: int | None = None  # None -> max_window_detections
    greedy_fallback: bool = False

    # -- gating and scoring
    motion_gate: float = 15.0
    appearance_gate: float = 0.85
    null_appearance: float = 0.3
    w_motion: float = 0.1
    w_appearance: float = 0.9
    w_confidence: float = 3.0
    v_space: float | None = None  # None -> image_width * image_height
    miss_penalty: float = 0.3

    # -- tree management
    prune_depth: int = 2
    patience: int = 10
    max_leaves: int = 8
    mwis_exact_max: int = 40

    # -- Kalman filter (pixels, pixels/frame)
    kf_init_pos_var: float = 1.0
    kf_init_vel_var: float = 1e3
    kf_q_pos: float = 1.0
    kf_q_vel: float = 0.25
    kf_r: float = 1.0

    # -- output
    min_track_hits: int = 3
    smooth: bool = True

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool) or value is None or isinstance(value, str):
                continue
            if not math.isfinite(value):
                raise ConfigError(f"{f.name} must be finite, got {value!r}")
            if value < 0:
                raise ConfigError(f"{f.name} must be >= 0, got {value!r}")
        if self.median_window < 1 or self.median_window % 2 == 0:
            raise ConfigError(f"median_window must be odd and >= 1, got {self.median_window}")
        if self.max_window < 1 or self.stride < 1:
            raise ConfigError("max_window and stride must be >= 1")
        if self.min_samples < 1 or self.eps <= 0:
            raise ConfigError("eps must be > 0 and min_samples >= 1")
        if not 0.0 < self.null_appearance < 1.0:
            raise ConfigError("null_appearance must lie in (0, 1)")
        if self.prune_depth < 1:
            raise ConfigError("prune_depth must be >= 1")
        if self.max_leaves < 1:
            raise ConfigError("max_leaves must be >= 1")
        if self.cluster_metric not in ("pixel", "weighted"):
            raise ConfigError(f"unknown cluster_metric {self.cluster_metric!r}")

    # resolved defaults that depend on other fields
    @property
    def position_scale(self) -> float:
        return self.eps if self.sigma_pos is None else self.sigma_pos

    @property
    def observation_volume(self) -> float:
        return float(self.image_width * self.image_height) if self.v_space is None else self.v_space

    @property
    def budget(self) -> int:
        return self.max_window_detections if self.solver_budget is None else self.solver_budget

    @property
    def diagonal(self) -> float:
        return math.hypot(self.image_width, self.image_height)

    def replace(self, **changes) -> Config:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _coerce(raw: str, declared: str):
    text = raw.strip()
    if text.lower() in ("none", "null", ""):
        return None
    if declared.startswith("bool"):
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"not a boolean: {raw!r}")
    if declared.startswith("int"):
        return int(text)
    if declared.startswith("str"):
        return text
    return float(text)


def parse_config(text: str, base: Config | None = None) -> Config:
    """Parse ``key = value`` lines on top of ``base``.

    Blank lines and ``#`` comments are ignored. Unknown keys are logged
    and skipped rather than rejected.
    """
    base = base or Config()
    known = {f.name: f for f in fields(Config)}
    changes = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in known:
            logger.warning("config line %d: unknown key %r ignored", lineno, key)
            continue
        try:
            changes[key] = _coerce(value, known[key].type)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {value!r}") from exc
    return base.replace(**changes)


def load_config(path: str | Path) -> Config:
    return parse_config(Path(path).read_text())


def dump_config(cfg: Config) -> str:
    return "".join(f"{k} = {v}\n" for k, v in cfg.to_dict().items())
