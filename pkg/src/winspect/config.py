"""Pipeline configuration and calibration-limits documents.

Both artifacts are flat JSON files. Unknown keys are rejected so a typo like
"toleranse" fails at load time instead of silently running defaults; the one
exception is segmenter.backend_options, an opaque block handed to external
backends untouched.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

from .analysis import AreaThresholds, ClusterParams
from .errors import ConfigError
from .raster import WindowSpec
from .segmenter import SegmenterConfig

CALIBRATED = "calibrated"


def _require_keys(section: str, data: dict, allowed: set[str]) -> None:
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown {section} keys: {sorted(unknown)}")


def _number(section: str, key: str, value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{section}.{key} must be a number, got {value!r}")
    return float(value)


def _integer(section: str, key: str, value) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{section}.{key} must be an integer, got {value!r}")
    return value


@dataclass
class PipelineConfig:
    window: WindowSpec = field(
        default_factory=lambda: WindowSpec(48, 48, 16, 16)
    )
    segmenter: SegmenterConfig = field(default_factory=SegmenterConfig)
    thresholds: AreaThresholds = field(
        default_factory=lambda: AreaThresholds(100, 1000)
    )
    cluster: ClusterParams = field(default_factory=ClusterParams)
    decision_threshold: float | str = CALIBRATED
    ewma_lambda: float = 0.1
    ewma_quantile: float = 0.95

    def __post_init__(self):
        if isinstance(self.decision_threshold, str):
            if self.decision_threshold != CALIBRATED:
                raise ConfigError(
                    f'decision_threshold must be a number or "{CALIBRATED}"'
                )
        else:
            t = self.decision_threshold
            if isinstance(t, bool) or not isinstance(t, (int, float)) or t < 0:
                raise ConfigError("decision_threshold must be >= 0")
            self.decision_threshold = float(t)
        if not 0.0 < self.ewma_lambda < 1.0:
            raise ConfigError("ewma.lambda must satisfy 0 < lambda < 1")
        if not 0.0 < self.ewma_quantile < 1.0:
            raise ConfigError("ewma.quantile must satisfy 0 < quantile < 1")

    def require_concrete_threshold(self) -> float:
        if isinstance(self.decision_threshold, str):
            raise ConfigError(
                "decision_threshold is still \"calibrated\"; run calibrate and "
                "set the numeric value (or pass --decision-threshold)"
            )
        return self.decision_threshold


def config_from_dict(data: dict) -> PipelineConfig:
    if not isinstance(data, dict):
        raise ConfigError("config document must be a JSON object")
    _require_keys(
        "config",
        data,
        {"window", "segmenter", "thresholds", "cluster", "decision_threshold", "ewma"},
    )
    kwargs = {}

    win = data.get("window")
    if win is not None:
        _require_keys("window", win, {"width", "height", "step_w", "step_h"})
        defaults = WindowSpec(48, 48, 16, 16)
        kwargs["window"] = WindowSpec(
            window_width=_integer("window", "width", win.get("width", defaults.window_width)),
            window_height=_integer("window", "height", win.get("height", defaults.window_height)),
            width_step=_integer("window", "step_w", win.get("step_w", defaults.width_step)),
            height_step=_integer("window", "step_h", win.get("step_h", defaults.height_step)),
        )

    seg = data.get("segmenter")
    if seg is not None:
        _require_keys(
            "segmenter",
            seg,
            {"backend", "threshold", "polarity", "connectivity",
             "fixture_path", "endpoint", "backend_options"},
        )
        base = SegmenterConfig()
        kwargs["segmenter"] = SegmenterConfig(
            backend=seg.get("backend", base.backend),
            threshold=seg.get("threshold", base.threshold),
            polarity=seg.get("polarity", base.polarity),
            connectivity=seg.get("connectivity", base.connectivity),
            fixture_path=seg.get("fixture_path"),
            endpoint=seg.get("endpoint"),
            backend_options=seg.get("backend_options") or {},
        )

    thr = data.get("thresholds")
    if thr is not None:
        _require_keys("thresholds", thr, {"lower", "upper"})
        kwargs["thresholds"] = AreaThresholds(
            lower=_number("thresholds", "lower", thr.get("lower", 100)),
            upper=_number("thresholds", "upper", thr.get("upper", 1000)),
        )

    clu = data.get("cluster")
    if clu is not None:
        _require_keys("cluster", clu, {"tolerance", "area_mode"})
        base = ClusterParams()
        kwargs["cluster"] = ClusterParams(
            tolerance=_number("cluster", "tolerance", clu.get("tolerance", base.tolerance)),
            area_mode=clu.get("area_mode", base.area_mode),
        )

    if "decision_threshold" in data:
        kwargs["decision_threshold"] = data["decision_threshold"]

    ewma = data.get("ewma")
    if ewma is not None:
        _require_keys("ewma", ewma, {"lambda", "quantile"})
        if "lambda" in ewma:
            kwargs["ewma_lambda"] = _number("ewma", "lambda", ewma["lambda"])
        if "quantile" in ewma:
            kwargs["ewma_quantile"] = _number("ewma", "quantile", ewma["quantile"])

    return PipelineConfig(**kwargs)


def config_to_dict(cfg: PipelineConfig) -> dict:
    seg = {
        "backend": cfg.segmenter.backend,
        "threshold": cfg.segmenter.threshold,
        "polarity": cfg.segmenter.polarity,
        "connectivity": cfg.segmenter.connectivity,
        "fixture_path": cfg.segmenter.fixture_path,
        "endpoint": cfg.segmenter.endpoint,
    }
    if cfg.segmenter.backend_options:
        seg["backend_options"] = cfg.segmenter.backend_options
    return {
        "window": {
            "width": cfg.window.window_width,
            "height": cfg.window.window_height,
            "step_w": cfg.window.width_step,
            "step_h": cfg.window.height_step,
        },
        "segmenter": seg,
        "thresholds": {
            "lower": cfg.thresholds.lower,
            "upper": cfg.thresholds.upper,
        },
        "cluster": {
            "tolerance": cfg.cluster.tolerance,
            "area_mode": cfg.cluster.area_mode,
        },
        "decision_threshold": cfg.decision_threshold,
        "ewma": {"lambda": cfg.ewma_lambda, "quantile": cfg.ewma_quantile},
    }


def load_config(path: str | os.PathLike) -> PipelineConfig:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return config_from_dict(data)


def save_config(cfg: PipelineConfig, path: str | os.PathLike) -> None:
    with open(path, "w") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2)
        fh.write("\n")


@dataclass(frozen=True)
class LimitsDoc:
    """Calibration output: control limit plus everything needed to rerun it."""

    ucl: float
    quantile: float
    z0: float
    lam: float
    calibration_size: int
    decision_threshold: float | None = None

    def __post_init__(self):
        if self.calibration_size < 1:
            raise ConfigError("calibration_size must be >= 1")
        if not 0.0 < self.quantile < 1.0:
            raise ConfigError("quantile must satisfy 0 < quantile < 1")
        if not 0.0 < self.lam < 1.0:
            raise ConfigError("lambda must satisfy 0 < lambda < 1")

    def to_dict(self) -> dict:
        d = {
            "ucl": self.ucl,
            "quantile": self.quantile,
            "z0": self.z0,
            "lambda": self.lam,
            "calibration_size": self.calibration_size,
        }
        if self.decision_threshold is not None:
            d["decision_threshold"] = self.decision_threshold
        return d


def limits_from_dict(data: dict) -> LimitsDoc:
    if not isinstance(data, dict):
        raise ConfigError("limits document must be a JSON object")
    required = {"ucl", "quantile", "z0", "lambda", "calibration_size"}
    _require_keys("limits", data, required | {"decision_threshold"})
    missing = required - set(data)
    if missing:
        raise ConfigError(f"limits document missing keys: {sorted(missing)}")
    dt = data.get("decision_threshold")
    return LimitsDoc(
        ucl=_number("limits", "ucl", data["ucl"]),
        quantile=_number("limits", "quantile", data["quantile"]),
        z0=_number("limits", "z0", data["z0"]),
        lam=_number("limits", "lambda", data["lambda"]),
        calibration_size=_integer("limits", "calibration_size", data["calibration_size"]),
        decision_threshold=None if dt is None else _number("limits", "decision_threshold", dt),
    )


def load_limits(path: str | os.PathLike) -> LimitsDoc:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return limits_from_dict(data)


def save_limits(doc: LimitsDoc, path: str | os.PathLike) -> None:
    with open(path, "w") as fh:
        json.dump(doc.to_dict(), fh, indent=2)
        fh.write("\n")
