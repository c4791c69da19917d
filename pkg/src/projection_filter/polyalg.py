"""Sparse multivariate polynomials over multi-indices and filter coefficient assembly.

A polynomial is a map from exponent tuples to float coefficients. The model
drift, dispersion and observation functions are polynomials, and so are the
natural statistics (single monomials). :func:`assemble_coefficients` expands

    L[c_i] - 1/2 |h|^2 c_i = a0_i + sum_j A0_ij c~_j
    1/2 |h|^2              = b0   + sum_j bh_j  c~_j
    h_k                    = lambda0_k + sum_i lambda_ik c_i

where L is the generator of the state SDE and c~ = (c, c_h) collects the
natural statistics followed by every extra monomial the expansion produces.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import AssumptionError, StructuralError

MultiIndex = tuple  # tuple[int, ...]


def grlex_key(index: MultiIndex):
    """Graded lexicographic sort key: total degree first, then exponents."""
    return (sum(index), tuple(index))


def zero_index(dim: int) -> MultiIndex:
    return (0,) * dim


def unit_index(dim: int, axis: int, power: int = 1) -> MultiIndex:
    e = [0] * dim
    e[axis] = power
    return tuple(e)


class Polynomial:
    """Sparse polynomial in ``dim`` variables with float coefficients.

    Zero coefficients are never stored, so two equal polynomials have equal
    ``terms`` dictionaries.
    """

    __slots__ = ("dim", "terms")

    def __init__(self, dim: int, terms: Mapping[MultiIndex, float] | None = None):
        if dim < 1:
            raise StructuralError(f"polynomial dimension must be >= 1, got {dim}")
        self.dim = int(dim)
        clean = {}
        for idx, coeff in (terms or {}).items():
            idx = tuple(int(e) for e in idx)
            if len(idx) != self.dim:
                raise StructuralError(f"multi-index {idx} does not have dimension {self.dim}")
            if any(e < 0 for e in idx):
                raise StructuralError(f"negative exponent in {idx}")
            coeff = float(coeff)
            if coeff != 0.0:
                clean[idx] = clean.get(idx, 0.0) + coeff
                if clean[idx] == 0.0:
                    del clean[idx]
        self.terms = clean

    # constructors -------------------------------------------------------
    @classmethod
    def constant(cls, dim: int, value: float) -> "Polynomial":
        return cls(dim, {zero_index(dim): value})

    @classmethod
    def monomial(cls, index: Sequence[int], coeff: float = 1.0) -> "Polynomial":
        return cls(len(index), {tuple(index): coeff})

    @classmethod
    def variable(cls, dim: int, axis: int) -> "Polynomial":
        return cls(dim, {unit_index(dim, axis): 1.0})

    # text format --------------------------------------------------------
    @classmethod
    def parse(cls, text: str, dim: int) -> "Polynomial":
        """Parse the term-list format ``coeff@e1,...,ed``, one term per line.

        Semicolons are accepted as line separators so a polynomial fits on a
        single command-line override. ``0`` or an empty string is the zero
        polynomial.
        """
        terms: dict = {}
        for raw in text.replace(";", "\n").splitlines():
            line = raw.strip()
            if not line or line == "0":
                continue
            if "@" not in line:
                raise StructuralError(f"term {line!r} is not of the form coeff@e1,...,ed")
            coeff_s, exps_s = line.split("@", 1)
            try:
                coeff = float(coeff_s)
                exps = tuple(int(e) for e in exps_s.split(","))
            except ValueError as err:
                raise StructuralError(f"cannot parse term {line!r}") from err
            if len(exps) != dim:
                raise StructuralError(f"term {line!r} has {len(exps)} exponents, expected {dim}")
            terms[exps] = terms.get(exps, 0.0) + coeff
        return cls(dim, terms)

    def to_text(self) -> str:
        if not self.terms:
            return "0"
        return "\n".join(
            f"{self.terms[idx]!r}@{','.join(str(e) for e in idx)}"
            for idx in sorted(self.terms, key=grlex_key)
        )

    # algebra ------------------------------------------------------------
    def _check(self, other: "Polynomial"):
        if not isinstance(other, Polynomial):
            return Polynomial.constant(self.dim, float(other))
        if other.dim != self.dim:
            raise StructuralError(f"dimension mismatch: {self.dim} vs {other.dim}")
        return other

    def __add__(self, other):
        other = self._check(other)
        out = dict(self.terms)
        for idx, c in other.terms.items():
            out[idx] = out.get(idx, 0.0) + c
        return Polynomial(self.dim, out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.dim, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._check(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            s = float(other)
            return Polynomial(self.dim, {k: s * v for k, v in self.terms.items()})
        other = self._check(other)
        out: dict = {}
        for i1, c1 in self.terms.items():
            for i2, c2 in other.terms.items():
                idx = tuple(a + b for a, b in zip(i1, i2))
                out[idx] = out.get(idx, 0.0) + c1 * c2
        return Polynomial(self.dim, out)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        out = Polynomial.constant(self.dim, 1.0)
        for _ in range(int(n)):
            out = out * self
        return out

    def __eq__(self, other):
        return isinstance(other, Polynomial) and self.dim == other.dim and self.terms == other.terms

    def __hash__(self):
        return hash((self.dim, frozenset(self.terms.items())))

    def __repr__(self):
        return f"Polynomial({self.dim}, {self.to_text().replace(chr(10), '; ')})"

    def is_zero(self) -> bool:
        return not self.terms

    @property
    def degree(self) -> int:
        return max((sum(k) for k in self.terms), default=0)

    def diff(self, axis: int) -> "Polynomial":
        if not 0 <= axis < self.dim:
            raise StructuralError(f"axis {axis} out of range for dimension {self.dim}")
        out = {}
        for idx, c in self.terms.items():
            e = idx[axis]
            if e:
                new = list(idx)
                new[axis] = e - 1
                out[tuple(new)] = c * e
        return Polynomial(self.dim, out)

    def coefficient(self, index: Sequence[int]) -> float:
        return self.terms.get(tuple(index), 0.0)

    def __call__(self, points) -> np.ndarray:
        """Evaluate at ``points`` of shape (n, dim); returns shape (n,)."""
        x = np.atleast_2d(np.asarray(points, dtype=float))
        if x.shape[1] != self.dim:
            raise StructuralError(f"points have dimension {x.shape[1]}, expected {self.dim}")
        out = np.zeros(x.shape[0])
        for idx, c in self.terms.items():
            out += c * np.prod(x ** np.asarray(idx), axis=1)
        return out


def poly_add(p: Polynomial, q: Polynomial) -> Polynomial:
    return p._check(q) + p


def poly_mul(p: Polynomial, q: Polynomial) -> Polynomial:
    return p * p._check(q)


def poly_diff(p: Polynomial, axis: int) -> Polynomial:
    return p.diff(axis)


def eval_monomials(points, indices: Sequence[MultiIndex]) -> np.ndarray:
    """Matrix with entry (j, i) = x_j ** indices[i]; points has shape (n, d)."""
    x = np.atleast_2d(np.asarray(points, dtype=float))
    if not indices:
        return np.zeros((x.shape[0], 0))
    e = np.asarray(indices, dtype=float)
    if e.shape[1] != x.shape[1]:
        raise StructuralError(f"points have dimension {x.shape[1]}, monomials {e.shape[1]}")
    out = np.ones((x.shape[0], len(indices)))
    for axis in range(x.shape[1]):
        col = x[:, axis][:, None]
        powers = e[:, axis][None, :]
        mask = powers != 0
        if mask.any():
            out *= np.where(mask, col ** powers, 1.0)
    return out


@dataclass(frozen=True)
class ModelSpec:
    """Time-invariant polynomial state-space model.

    dx = f(x) dt + sigma(x) dW,  E[dW dW^T] = Q dt
    dy = h(x) dt + dV,           E[dV dV^T] = R dt,  R diagonal
    """

    drift: tuple
    dispersion: tuple  # d_x rows of d_w polynomials
    process_spectral_density: np.ndarray
    observation: tuple
    observation_noise: np.ndarray | None = None  # None means identity

    def __post_init__(self):
        d = len(self.drift)
        if d < 1:
            raise StructuralError("model needs at least one state")
        object.__setattr__(self, "drift", tuple(self.drift))
        object.__setattr__(self, "dispersion", tuple(tuple(row) for row in self.dispersion))
        object.__setattr__(self, "observation", tuple(self.observation))
        polys = list(self.drift) + [p for row in self.dispersion for p in row] + list(self.observation)
        if any(p.dim != d for p in polys):
            raise StructuralError("all model polynomials must share the state dimension")
        if len(self.dispersion) != d:
            raise StructuralError(f"dispersion must have {d} rows")
        dw = len(self.dispersion[0]) if self.dispersion else 0
        if any(len(row) != dw for row in self.dispersion):
            raise StructuralError("dispersion rows have unequal length")
        Q = np.atleast_2d(np.asarray(self.process_spectral_density, dtype=float))
        if Q.shape != (dw, dw):
            raise StructuralError(f"Q must be {dw}x{dw}, got {Q.shape}")
        if dw and (not np.allclose(Q, Q.T) or np.linalg.eigvalsh(Q).min() <= 0):
            raise StructuralError("Q must be symmetric positive definite")
        object.__setattr__(self, "process_spectral_density", Q)
        if self.observation_noise is not None:
            R = np.asarray(self.observation_noise, dtype=float)
            if R.ndim == 2:
                if np.any(R != np.diag(np.diag(R))):
                    raise StructuralError("R must be diagonal")
                R = np.diag(R)
            R = np.atleast_1d(R)
            if R.shape != (len(self.observation),) or np.any(R <= 0):
                raise StructuralError("R must be a positive diagonal matching the observation")
            object.__setattr__(self, "observation_noise", R)

    @property
    def state_dim(self) -> int:
        return len(self.drift)

    @property
    def noise_dim(self) -> int:
        return len(self.dispersion[0]) if self.dispersion else 0

    @property
    def obs_dim(self) -> int:
        return len(self.observation)

    @property
    def noise_variances(self) -> np.ndarray:
        """Diagonal of R."""
        if self.observation_noise is None:
            return np.ones(self.obs_dim)
        return self.observation_noise

    def alpha(self) -> list:
        """alpha = sigma Q sigma^T as a d_x x d_x nested list of polynomials."""
        d, Q = self.state_dim, self.process_spectral_density
        out = [[Polynomial(d) for _ in range(d)] for _ in range(d)]
        for k in range(d):
            for l in range(d):
                acc = Polynomial(d)
                for a in range(self.noise_dim):
                    for b in range(self.noise_dim):
                        if Q[a, b] != 0.0:
                            acc = acc + self.dispersion[k][a] * self.dispersion[l][b] * Q[a, b]
                out[k][l] = acc
        return out

    def normalized(self) -> "ModelSpec":
        """Equivalent model with R = I, obtained by scaling h_k by R_kk^(-1/2).

        Measurement increments must then be scaled the same way, see
        :meth:`scale_increments`.
        """
        if self.observation_noise is None:
            return self
        s = 1.0 / np.sqrt(self.observation_noise)
        return ModelSpec(
            self.drift,
            self.dispersion,
            self.process_spectral_density,
            tuple(h * sk for h, sk in zip(self.observation, s)),
            None,
        )

    def scale_increments(self, dy) -> np.ndarray:
        return np.asarray(dy, dtype=float) / np.sqrt(self.noise_variances)

    # pointwise evaluation used by the reference solvers
    def eval_drift(self, x) -> np.ndarray:
        x = np.atleast_2d(x)
        return np.stack([f(x) for f in self.drift], axis=1)

    def eval_observation(self, x) -> np.ndarray:
        x = np.atleast_2d(x)
        if not self.observation:
            return np.zeros((x.shape[0], 0))
        return np.stack([h(x) for h in self.observation], axis=1)

    def eval_dispersion(self, x) -> np.ndarray:
        """Array of shape (n, d_x, d_w)."""
        x = np.atleast_2d(x)
        out = np.empty((x.shape[0], self.state_dim, self.noise_dim))
        for k, row in enumerate(self.dispersion):
            for a, p in enumerate(row):
                out[:, k, a] = p(x)
        return out

    def is_constant_dispersion(self) -> bool:
        return all(p.degree == 0 for row in self.dispersion for p in row)


def generator_apply(model: ModelSpec, p: Polynomial) -> Polynomial:
    """Backward diffusion operator L[p] = f . grad p + 1/2 tr(alpha Hess p)."""
    if p.dim != model.state_dim:
        raise StructuralError(f"polynomial dimension {p.dim} != state dimension {model.state_dim}")
    d = model.state_dim
    out = Polynomial(d)
    grads = [p.diff(k) for k in range(d)]
    for k in range(d):
        if not model.drift[k].is_zero():
            out = out + model.drift[k] * grads[k]
    alpha = model.alpha()
    for k in range(d):
        for l in range(d):
            if not alpha[k][l].is_zero():
                out = out + alpha[k][l] * grads[k].diff(l) * 0.5
    return out


@dataclass(frozen=True)
class StatisticsBasis:
    """Natural statistics c followed by the extension statistics c_h."""

    natural: tuple
    extension: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "natural", tuple(tuple(int(e) for e in i) for i in self.natural))
        object.__setattr__(self, "extension", tuple(tuple(int(e) for e in i) for i in self.extension))
        everything = self.natural + self.extension
        if not self.natural:
            raise StructuralError("at least one natural statistic is required")
        dims = {len(i) for i in everything}
        if len(dims) != 1:
            raise StructuralError("statistics have inconsistent dimensions")
        if len(set(everything)) != len(everything):
            raise StructuralError("a statistic appears twice")
        for i in everything:
            if any(e < 0 for e in i):
                raise StructuralError(f"negative exponent in statistic {i}")
            if sum(i) == 0:
                raise StructuralError("the constant monomial cannot be a statistic")

    @property
    def dim(self) -> int:
        return len(self.natural[0])

    @property
    def m(self) -> int:
        return len(self.natural)

    @property
    def m_h(self) -> int:
        return len(self.extension)

    @property
    def extended(self) -> tuple:
        return self.natural + self.extension

    def position(self, index) -> int | None:
        try:
            return self.extended.index(tuple(index))
        except ValueError:
            return None


@dataclass(frozen=True)
class CoefficientSet:
    a0: np.ndarray
    A0: np.ndarray
    b0: float
    bh: np.ndarray
    lam: np.ndarray  # m x d_y, column k holds lambda_k
    lam0: np.ndarray  # d_y
    dy_scale: np.ndarray | None = None  # R^(-1/2) diagonal; raw increments are multiplied by it

    def scale_increments(self, dy) -> np.ndarray:
        dy = np.atleast_1d(np.asarray(dy, dtype=float))
        return dy if self.dy_scale is None else dy * self.dy_scale

    def drift_rhs(self, eta: np.ndarray, eta_tilde: np.ndarray) -> np.ndarray:
        """a0 + b0 eta + (A0 + eta bh^T) eta~."""
        return self.a0 + self.b0 * eta + self.A0 @ eta_tilde + eta * (self.bh @ eta_tilde)


def _split(poly: Polynomial, position: dict, ncols: int):
    const = poly.coefficient(zero_index(poly.dim))
    row = np.zeros(ncols)
    for idx, c in poly.terms.items():
        if sum(idx):
            row[position[idx]] = c
    return const, row


def assemble_coefficients(model: ModelSpec, natural: Iterable[MultiIndex]):
    """Expand the filter right-hand side over the statistics.

    Returns ``(basis, coeffs)``. The observation noise is folded into h first
    (see :meth:`ModelSpec.normalized`), so the coefficients refer to R = I and
    ``coeffs.scale_increments`` maps raw measurement increments accordingly.
    """
    natural = tuple(tuple(i) for i in natural)
    dy_scale = 1.0 / np.sqrt(model.noise_variances)
    basis0 = StatisticsBasis(natural)
    if basis0.dim != model.state_dim:
        raise StructuralError(f"statistics have dimension {basis0.dim}, model {model.state_dim}")
    model = model.normalized()
    d = model.state_dim

    # lambda from expanding h over {1, c}
    nat_pos = {idx: i for i, idx in enumerate(natural)}
    lam = np.zeros((len(natural), model.obs_dim))
    lam0 = np.zeros(model.obs_dim)
    for k, h in enumerate(model.observation):
        for idx, coeff in h.terms.items():
            if sum(idx) == 0:
                lam0[k] = coeff
            elif idx in nat_pos:
                lam[nat_pos[idx], k] = coeff
            else:
                raise AssumptionError(
                    f"observation component {k} contains monomial {idx} outside span{{1, c}}"
                )

    half_h2 = Polynomial(d)
    for h in model.observation:
        half_h2 = half_h2 + h * h * 0.5

    rows = [generator_apply(model, Polynomial.monomial(c)) - half_h2 * Polynomial.monomial(c) for c in natural]

    extra = set()
    for poly in rows + [half_h2]:
        for idx in poly.terms:
            if sum(idx) and idx not in nat_pos:
                extra.add(idx)
    extension = tuple(sorted(extra, key=grlex_key))
    basis = StatisticsBasis(natural, extension)
    position = {idx: i for i, idx in enumerate(basis.extended)}
    ncols = basis.m + basis.m_h

    a0 = np.zeros(basis.m)
    A0 = np.zeros((basis.m, ncols))
    for i, poly in enumerate(rows):
        a0[i], A0[i] = _split(poly, position, ncols)
    b0, bh = _split(half_h2, position, ncols)
    return basis, CoefficientSet(a0=a0, A0=A0, b0=float(b0), bh=bh, lam=lam, lam0=lam0, dy_scale=dy_scale)
