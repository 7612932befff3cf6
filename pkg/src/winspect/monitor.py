"""EWMA control chart over per-image scores.

The chart statistic follows z' = (1 - lambda) * z + lambda * x. The starting
value z0 is the mean score of a fault-free calibration set, and the upper
control limit is an empirical-CDF quantile: the smallest calibration value
whose ECDF reaches the target fraction (the ceil(q*n)-th order statistic,
no interpolation). An alarm fires at every step whose statistic strictly
exceeds the limit; there are no run rules and no lower limit.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence, TextIO

import numpy as np

from .errors import EmptyCalibrationSet


@dataclass(frozen=True)
class EwmaState:
    """Smoothing parameter, current statistic, and step index."""

    lam: float
    z: float
    t: int = 0

    def __post_init__(self):
        if not 0.0 < self.lam < 1.0:
            raise ValueError(f"lambda must be in (0, 1), got {self.lam}")
        if self.t < 0:
            raise ValueError(f"step index must be >= 0, got {self.t}")


@dataclass(frozen=True)
class ControlLimits:
    ucl: float
    quantile: float = 0.95
    calibration_size: int = 1

    def __post_init__(self):
        if self.calibration_size < 1:
            raise ValueError("calibration_size must be >= 1")


@dataclass
class MonitorTrace:
    """Chart data: one (t, x, z, alarm) row per monitored observation."""

    series: list[tuple[int, float, float, bool]]

    def first_alarm(self) -> int | None:
        for t, _, _, alarm in self.series:
            if alarm:
                return t
        return None

    def alarms(self) -> list[int]:
        return [t for t, _, _, alarm in self.series if alarm]


def ewma_update(state: EwmaState, x: float) -> EwmaState:
    """One chart step: z' = (1 - lambda) z + lambda x."""
    if not np.isfinite(x) or x < 0:
        raise ValueError(f"observation must be finite and >= 0, got {x}")
    return EwmaState(lam=state.lam, z=(1.0 - state.lam) * state.z + state.lam * x, t=state.t + 1)


def ewma_series(xs: Sequence[float], lam: float, z0: float) -> list[float]:
    """Statistic values z_1..z_n for a score stream, starting from z0."""
    state = EwmaState(lam=lam, z=z0)
    out = []
    for x in xs:
        state = ewma_update(state, x)
        out.append(state.z)
    return out


def calibrate_z0(fault_free_scores: Sequence[float]) -> float:
    """Chart start value: arithmetic mean of fault-free scores."""
    n = len(fault_free_scores)
    if n == 0:
        raise EmptyCalibrationSet("z0 calibration needs at least one score")
    return float(sum(fault_free_scores) / n)


def calibrate_ucl(in_control_stats: Sequence[float], quantile: float = 0.95) -> ControlLimits:
    """ECDF quantile limit: smallest value v with (count <= v) / n >= quantile."""
    n = len(in_control_stats)
    if n == 0:
        raise EmptyCalibrationSet("UCL calibration needs at least one value")
    if not 0.0 < quantile < 1.0:
        raise ValueError(f"quantile must be in (0, 1), got {quantile}")
    ordered = np.sort(np.asarray(in_control_stats, dtype=np.float64))
    ecdf = np.arange(1, n + 1, dtype=np.float64) / n
    k = int(np.searchsorted(ecdf, quantile, side="left"))
    return ControlLimits(ucl=float(ordered[k]), quantile=quantile, calibration_size=n)


def monitor_stream(
    xs: Sequence[float], lam: float, z0: float, limits: ControlLimits
) -> MonitorTrace:
    """Run the chart over a stream; alarm at every t with z_t > ucl."""
    state = EwmaState(lam=lam, z=z0)
    series = []
    for x in xs:
        state = ewma_update(state, x)
        series.append((state.t, float(x), state.z, state.z > limits.ucl))
    return MonitorTrace(series=series)


TRACE_HEADER = ["t", "x", "z", "alarm"]


def write_trace_csv(trace: MonitorTrace, out: TextIO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    for t, x, z, alarm in trace.series:
        w.writerow([t, repr(float(x)), repr(float(z)), int(alarm)])


def read_trace_csv(rows: Iterable[str]) -> MonitorTrace:
    reader = csv.reader(rows)
    header = next(reader, None)
    if header != TRACE_HEADER:
        raise ValueError(f"expected header {TRACE_HEADER}, got {header}")
    series = []
    for row in reader:
        if not row:
            continue
        t, x, z, alarm = row
        series.append((int(t), float(x), float(z), bool(int(alarm))))
    return MonitorTrace(series=series)
