"""Rectangular evaluation grids carrying density values."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from ..errors import StructuralError
from ..polyalg import eval_monomials


@dataclass(frozen=True, eq=False)
class DensityGrid:
    """Values of a density on the tensor grid of uniform ``axes``.

    ``axes`` is a tuple of ``(lo, hi, count)`` triples; ``values`` has shape
    ``(count_1, ..., count_d)`` in C order.
    """

    axes: tuple
    values: np.ndarray

    def __post_init__(self):
        axes = tuple((float(lo), float(hi), int(n)) for lo, hi, n in self.axes)
        values = np.asarray(self.values, dtype=float)
        shape = tuple(n for _, _, n in axes)
        if values.ndim == 1 and values.size == int(np.prod(shape)):
            values = values.reshape(shape)
        if values.shape != shape:
            raise StructuralError(f"values shape {values.shape} does not match axes {axes}")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, axes) -> "DensityGrid":
        return cls(axes, np.zeros(tuple(int(n) for _, _, n in axes)))

    @classmethod
    def from_function(cls, axes, fn) -> "DensityGrid":
        """Evaluate ``fn`` on the mesh points (shape (N, d)) and normalize."""
        g = cls.zeros(axes)
        return cls(g.axes, fn(g.points()).reshape(g.shape)).normalized()

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple:
        return self.values.shape

    @property
    def spacing(self) -> np.ndarray:
        return np.array([(hi - lo) / (n - 1) for lo, hi, n in self.axes])

    def coords(self) -> list:
        return [np.linspace(lo, hi, n) for lo, hi, n in self.axes]

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.coords(), indexing="ij")
        return np.column_stack([m.ravel() for m in mesh])

    def integrate(self, values=None) -> float:
        v = self.values if values is None else np.asarray(values).reshape(self.shape)
        for x in reversed(self.coords()):
            v = trapezoid(v, x, axis=-1)
        return float(v)

    def mass(self) -> float:
        return self.integrate()

    def normalized(self) -> "DensityGrid":
        mass = self.mass()
        if not mass > 0:
            raise ArithmeticError("cannot normalize a grid with zero mass")
        return DensityGrid(self.axes, self.values / mass)

    def expectation(self, index) -> float:
        """E[x^index] by the trapezoidal rule; assumes the grid is normalized."""
        mono = eval_monomials(self.points(), [tuple(index)])[:, 0]
        return self.integrate(self.values.ravel() * mono)

    def mean(self) -> np.ndarray:
        pts = self.points()
        return np.array([self.integrate(self.values.ravel() * pts[:, k]) for k in range(self.dim)])

    def same_axes(self, other: "DensityGrid") -> bool:
        return self.axes == other.axes

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["# axes"] + [f"{lo!r}:{hi!r}:{n}" for lo, hi, n in self.axes])
            for row in self.values.reshape(self.shape[0], -1):
                w.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path) -> "DensityGrid":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        axes = tuple((float(a), float(b), int(n)) for a, b, n in (s.split(":") for s in rows[0][1:]))
        values = np.array([[float(v) for v in r] for r in rows[1:]]).reshape(tuple(n for _, _, n in axes))
        return cls(axes, values)
