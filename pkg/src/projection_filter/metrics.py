"""Distances between filtering densities and moment-error traces."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import CapabilityError, StructuralError


@dataclass(frozen=True)
class ComparisonTrace:
    times: np.ndarray
    values: np.ndarray
    label: tuple

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.shape != v.shape:
            raise StructuralError("times and values differ in length")
        if np.any(~np.isfinite(v)) or np.any(v < 0):
            raise StructuralError("trace values must be finite and non-negative")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "label", tuple(self.label))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time", "value"])
            for t, v in zip(self.times, self.values):
                w.writerow([repr(float(t)), repr(float(v))])


def hellinger(p, q) -> float:
    """H = sqrt(1 - int sqrt(p q)) by the trapezoidal rule on the shared grid."""
    if not p.same_axes(q):
        raise StructuralError("densities live on different grids")
    bc = p.integrate(np.sqrt(np.maximum(p.values, 0.0) * np.maximum(q.values, 0.0)))
    return float(np.sqrt(min(max(1.0 - bc, 0.0), 1.0)))


def hellinger_trace(times, pairs, label=("a", "b")) -> ComparisonTrace:
    return ComparisonTrace(times, [hellinger(p, q) for p, q in pairs], label)


def moment_trace(source_a, source_b, statistic, label=("a", "b"), atol=1e-9) -> ComparisonTrace:
    """|E_a[x^i] - E_b[x^i]| at the shared time stamps of two moment sources.

    A source has ``times`` and ``expectation(index)`` returning one value per time.
    """
    ta, tb = np.asarray(source_a.times), np.asarray(source_b.times)
    if ta.shape != tb.shape or np.any(np.abs(ta - tb) > atol):
        raise CapabilityError("moment sources are recorded at different times")
    ea = np.asarray(source_a.expectation(statistic), dtype=float)
    eb = np.asarray(source_b.expectation(statistic), dtype=float)
    return ComparisonTrace(ta, np.abs(ea - eb), label)
