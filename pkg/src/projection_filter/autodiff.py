"""Second-order forward-mode automatic differentiation.

:class:`Dual2` carries a value, a gradient over ``p`` inputs and a Hessian
restricted to the leading ``q`` inputs. The log-partition function only needs
the Fisher block over the natural parameters while the extension statistics
need first derivatives, so ``q < p`` is the normal case.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .errors import DomainError, StructuralError


class Dual2:
    __slots__ = ("value", "grad", "hess")

    def __init__(self, value: float, grad, hess):
        self.value = float(value)
        self.grad = np.asarray(grad, dtype=float)
        self.hess = np.asarray(hess, dtype=float)

    @property
    def p(self) -> int:
        return self.grad.shape[0]

    @property
    def q(self) -> int:
        return self.hess.shape[0]

    def _coerce(self, other) -> "Dual2":
        if isinstance(other, Dual2):
            if other.p != self.p or other.q != self.q:
                raise StructuralError(f"width mismatch: ({self.p},{self.q}) vs ({other.p},{other.q})")
            return other
        return lift_const(float(other), self.p, self.q)

    def __add__(self, other):
        other = self._coerce(other)
        return Dual2(self.value + other.value, self.grad + other.grad, self.hess + other.hess)

    __radd__ = __add__

    def __neg__(self):
        return Dual2(-self.value, -self.grad, -self.hess)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Dual2):
            return scale(self, float(other))
        other = self._coerce(other)
        q = self.q
        ga, gb = self.grad[:q], other.grad[:q]
        cross = np.outer(ga, gb)
        hess = self.hess * other.value + other.hess * self.value + (cross + cross.T)
        return Dual2(self.value * other.value, self.grad * other.value + other.grad * self.value, hess)

    __rmul__ = __mul__

    def __repr__(self):
        return f"Dual2(value={self.value!r}, grad={self.grad!r}, hess={self.hess!r})"


def lift_const(value: float, p: int, q: int | None = None) -> Dual2:
    q = p if q is None else q
    return Dual2(value, np.zeros(p), np.zeros((q, q)))


def lift_var(j: int, value: float, p: int, q: int | None = None) -> Dual2:
    """Seed input ``j``: unit gradient along ``j``, zero Hessian."""
    q = p if q is None else q
    if not 0 <= j < p:
        raise StructuralError(f"variable index {j} out of range for width {p}")
    if not 0 <= q <= p:
        raise StructuralError(f"Hessian width {q} must lie in [0, {p}]")
    grad = np.zeros(p)
    grad[j] = 1.0
    return Dual2(value, grad, np.zeros((q, q)))


def add(a: Dual2, b: Dual2) -> Dual2:
    return a + b


def mul(a: Dual2, b: Dual2) -> Dual2:
    return a * b


def scale(a: Dual2, s: float) -> Dual2:
    return Dual2(a.value * s, a.grad * s, a.hess * s)


def exp(a: Dual2) -> Dual2:
    v = math.exp(a.value)
    g = a.grad[: a.q]
    return Dual2(v, v * a.grad, v * (a.hess + np.outer(g, g)))


def log(a: Dual2) -> Dual2:
    if not a.value > 0.0:
        raise DomainError(f"log of non-positive value {a.value}")
    inv = 1.0 / a.value
    g = a.grad[: a.q]
    return Dual2(math.log(a.value), a.grad * inv, a.hess * inv - np.outer(g, g) * inv * inv)


def dot(xs: Sequence[Dual2], coeffs) -> Dual2:
    """sum_i coeffs[i] * xs[i]."""
    coeffs = np.asarray(coeffs, dtype=float)
    if len(xs) != coeffs.shape[0] or not len(xs):
        raise StructuralError("dot needs equally long, non-empty operands")
    value = 0.0
    grad = np.zeros(xs[0].p)
    hess = np.zeros((xs[0].q, xs[0].q))
    for x, c in zip(xs, coeffs):
        if c != 0.0:
            value += c * x.value
            grad += c * x.grad
            hess += c * x.hess
    return Dual2(value, grad, hess)


def log_sum_exp(terms: Sequence[Dual2]) -> Dual2:
    """log sum_i exp(t_i), shifted by the largest value for stability.

    The gradient is the softmax-weighted mean of the term gradients and the
    Hessian the softmax-weighted second moment (term Hessians included)
    minus the outer product of that mean.
    """
    if not len(terms):
        raise DomainError("log_sum_exp of an empty sequence")
    shift = max(t.value for t in terms)
    p, q = terms[0].p, terms[0].q
    total = lift_const(0.0, p, q)
    for t in terms:
        total = total + exp(t - shift)
    out = log(total)
    return Dual2(out.value + shift, out.grad, out.hess)


def variables(values, q: int | None = None) -> list:
    """Seed every entry of ``values`` as an independent input."""
    values = np.asarray(values, dtype=float)
    p = values.shape[0]
    return [lift_var(j, v, p, q) for j, v in enumerate(values)]
