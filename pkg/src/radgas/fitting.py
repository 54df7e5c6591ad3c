"""Norm time series and power-law decay fits.

A decay fit models ``value ~ C (1 + t)**alpha``, optionally times
``ln(1 + t)``, by least squares on ``log(value)`` against ``log(1 + t)``.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import FitError

MIN_SAMPLES = 6


@dataclass(frozen=True)
class NormSeries:
    """Time-stamped samples of one norm.

    ``kind`` is a short descriptor such as ``"L2"``, ``"d1 L2"``, ``"H3"``,
    ``"L1"``, ``"Linf"`` or ``"L1_1"``.
    """

    kind: str
    times: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.shape != v.shape or t.ndim != 1:
            raise ValueError("times and values must be 1-d arrays of equal length")
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError(f"norm series {self.kind!r} has negative or non-finite values")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.times.size

    def is_zero(self) -> bool:
        return bool(np.all(self.values == 0))

    def window(self, t_lo: float, t_hi: float) -> "NormSeries":
        sel = (self.times >= t_lo) & (self.times <= t_hi)
        return NormSeries(self.kind, self.times[sel], self.values[sel], dict(self.meta))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t", "value"])
            for t, v in zip(self.times, self.values):
                writer.writerow([repr(float(t)), repr(float(v))])

    @classmethod
    def from_csv(cls, path, kind: str | None = None) -> "NormSeries":
        times, values = [], []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header[:2]] != ["t", "value"]:
                raise FitError(f"{path}: expected header 't,value'")
            for row in reader:
                if row:
                    times.append(float(row[0]))
                    values.append(float(row[1]))
        return cls(kind or str(path), np.array(times), np.array(values))


@dataclass(frozen=True)
class DecayFit:
    exponent: float
    intercept: float
    t_lo: float
    t_hi: float
    rms: float
    log_correction: bool
    samples: int

    @property
    def decades(self) -> float:
        return float(np.log10((1.0 + self.t_hi) / (1.0 + self.t_lo)))

    def to_dict(self) -> dict:
        return {
            "exponent": self.exponent,
            "intercept": self.intercept,
            "window": [self.t_lo, self.t_hi],
            "rms": self.rms,
            "log_correction": self.log_correction,
            "samples": self.samples,
        }


def default_window(times, t_valid: float | None = None) -> tuple:
    """One decade in ``1 + t`` ending at the last sample inside the valid horizon.

    Both ends snap to sample times: ``t_hi`` is the latest sample not past
    ``t_valid`` and ``t_lo`` the latest sample with ``1 + t_lo <= (1 + t_hi)/10``
    (or the first positive sample when the record is shorter than a decade).
    """
    times = np.asarray(times, dtype=float)
    if times.size == 0:
        raise FitError("no samples")
    inside = times if t_valid is None else times[times <= t_valid * (1 + 1e-12)]
    if inside.size == 0:
        raise FitError(f"no samples before the valid horizon {t_valid:g}")
    t_hi = float(inside[-1])
    early = inside[(1.0 + inside) <= (1.0 + t_hi) / 10.0 * (1 + 1e-12)]
    positive = inside[inside > 0]
    if early.size:
        t_lo = float(early[-1])
    else:
        t_lo = float(positive[0]) if positive.size else float(inside[0])
    return t_lo, t_hi


def fit_decay(series: NormSeries, window=None, log_correction: bool = False) -> DecayFit:
    """Least-squares power-law exponent of ``series`` on ``window``."""
    if window is None:
        window = default_window(series.times)
    t_lo, t_hi = float(window[0]), float(window[1])
    if not t_lo < t_hi:
        raise FitError(f"empty fit window [{t_lo}, {t_hi}]")
    sub = series.window(t_lo, t_hi)
    if len(sub) < MIN_SAMPLES:
        raise FitError(
            f"{series.kind}: {len(sub)} samples in [{t_lo:g}, {t_hi:g}], need {MIN_SAMPLES}"
        )
    if np.any(sub.values <= 0):
        raise FitError(f"{series.kind}: nonpositive values in window; shrink it")
    x = np.log1p(sub.times)
    y = np.log(sub.values)
    if log_correction:
        if np.any(sub.times <= 0):
            raise FitError("log-corrected fit needs t > 0")
        y = y - np.log(np.log1p(sub.times))
    A = np.vstack([x, np.ones_like(x)]).T
    (alpha, c), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (alpha * x + c)
    fit = DecayFit(
        exponent=float(alpha),
        intercept=float(c),
        t_lo=float(sub.times[0]),
        t_hi=float(sub.times[-1]),
        rms=float(np.sqrt(np.mean(resid**2))),
        log_correction=log_correction,
        samples=len(sub),
    )
    if fit.decades < 1.0 - 1e-9:
        warnings.warn(
            f"{series.kind}: fit window spans {fit.decades:.2f} decades in (1+t); "
            "fit may be unreliable",
            stacklevel=2,
        )
    return fit
