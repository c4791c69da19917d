"""Quadrature rules on (-1, 1)^d.

One-dimensional rules are Gauss-Chebyshev (first kind, weight
(1 - x^2)^(-1/2)), Clenshaw-Curtis and Gauss-Patterson (both unit weight and
nested). Multidimensional grids come from Smolyak's construction over a
nested rule, or from a Halton sequence for quasi-Monte Carlo comparisons.

Smolyak levels count from zero in the sense that level ``L`` combines the
tensor differences with ``sum(k_i - 1) <= L`` over 1-based 1-D levels ``k_i``.
With Gauss-Patterson in two dimensions this gives ``L * 2**(L+1) + 1`` nodes,
so levels 3, 4, 5, 6, 8 have 49, 129, 321, 769, 4097 nodes.
"""
from __future__ import annotations

import csv
import functools
import itertools
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np
from scipy.stats import qmc

from .errors import CapabilityError, DomainError

MERGE_TOL = 1e-12
DEFAULT_MAX_NODES = 5_000_000
GP_MAX_LEVEL = 9


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Nodes in the open cube with weights.

    ``weight_function`` is ``"unit"`` when ``sum(w_j f(x_j))`` approximates
    the plain integral of f, and ``"chebyshev"`` when it approximates the
    integral of f(x) (1 - x^2)^(-1/2) (Gauss-Chebyshev grids).
    """

    nodes: np.ndarray
    weights: np.ndarray
    rule: str
    level: int | None = None
    weight_function: str = "unit"

    def __post_init__(self):
        nodes = np.ascontiguousarray(np.atleast_2d(self.nodes), dtype=float)
        weights = np.ascontiguousarray(self.weights, dtype=float)
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    def __len__(self) -> int:
        return self.nodes.shape[0]

    def integrate(self, f) -> float:
        return float(np.dot(self.weights, f(self.nodes)))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"x{i + 1}" for i in range(self.dim)] + ["weight"])
            for x, w in zip(self.nodes, self.weights):
                writer.writerow([repr(float(v)) for v in x] + [repr(float(w))])


def _grid_1d(nodes, weights, rule, level, weight_function="unit"):
    order = np.argsort(nodes, kind="stable")
    return QuadratureGrid(np.asarray(nodes)[order][:, None], np.asarray(weights)[order], rule, level, weight_function)


def gauss_chebyshev(n: int) -> QuadratureGrid:
    """n-point Gauss-Chebyshev rule of the first kind; all weights pi/n."""
    if n < 1:
        raise DomainError(f"Gauss-Chebyshev needs n >= 1, got {n}")
    i = np.arange(1, n + 1)
    x = np.cos((i - 0.5) * np.pi / n)
    x[np.abs(x) < 1e-15] = 0.0
    # exact mirror symmetry
    x = 0.5 * (x - x[::-1])
    return _grid_1d(x, np.full(n, np.pi / n), "gauss_chebyshev", n, "chebyshev")


def _cc_count(level: int) -> int:
    return 1 if level == 1 else 2 ** (level - 1) + 1


@functools.lru_cache(maxsize=None)
def _cc_rule(level: int):
    n = _cc_count(level)
    if n == 1:
        return np.array([0.0]), np.array([2.0])
    N = n - 1
    theta = np.pi * np.arange(n) / N
    x = -np.cos(theta)
    x = 0.5 * (x - x[::-1])
    x[N // 2] = 0.0
    w = np.empty(n)
    for j in range(n):
        s = 0.0
        for k in range(1, N // 2 + 1):
            b = 1.0 if 2 * k == N else 2.0
            s += b / (4 * k * k - 1) * np.cos(2 * k * theta[j])
        c = 1.0 if j in (0, N) else 2.0
        w[j] = c / N * (1.0 - s)
    return x, w


def clenshaw_curtis(level: int) -> QuadratureGrid:
    """Nested Clenshaw-Curtis rule with 1, 3, 5, 9, 17, ... nodes.

    The endpoints +-1 are kept; :func:`smolyak` drops them when asked.
    """
    if level < 1:
        raise DomainError(f"Clenshaw-Curtis level must be >= 1, got {level}")
    x, w = _cc_rule(level)
    return _grid_1d(x, w, "clenshaw_curtis", level)


@functools.lru_cache(maxsize=1)
def _gp_table():
    text = resources.files(__package__).joinpath("data/gauss_patterson.txt").read_text()
    table: dict = {}
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        lev, x, w = line.split()
        table.setdefault(int(lev), ([], []))
        table[int(lev)][0].append(float(x))
        table[int(lev)][1].append(float(w))
    return {k: (np.array(v[0]), np.array(v[1])) for k, v in table.items()}


def gauss_patterson(level: int) -> QuadratureGrid:
    """Tabulated Gauss-Patterson rule with 2**level - 1 nodes, level 1..8."""
    if not 1 <= level <= GP_MAX_LEVEL:
        raise CapabilityError(f"Gauss-Patterson is tabulated for levels 1..{GP_MAX_LEVEL}, got {level}")
    x, w = _gp_table()[level]
    return _grid_1d(x, w, "gauss_patterson", level)


@dataclass(frozen=True)
class Rule1D:
    kind: str
    nested: bool

    def count(self, level: int) -> int:
        if self.kind == "gauss_patterson":
            return 2 ** level - 1
        if self.kind == "clenshaw_curtis":
            return _cc_count(level)
        return level

    def __call__(self, level: int) -> QuadratureGrid:
        return RULE_FUNCTIONS[self.kind](level)


RULE_FUNCTIONS = {
    "gauss_chebyshev": gauss_chebyshev,
    "clenshaw_curtis": clenshaw_curtis,
    "gauss_patterson": gauss_patterson,
}
RULES = {
    "gauss_chebyshev": Rule1D("gauss_chebyshev", nested=False),
    "clenshaw_curtis": Rule1D("clenshaw_curtis", nested=True),
    "gauss_patterson": Rule1D("gauss_patterson", nested=True),
}


def _key(x) -> int:
    return int(round(float(x) / MERGE_TOL))


def _difference(rule: Rule1D, k: int):
    """Nodes and weights of Q_k - Q_{k-1} supported on the nodes of Q_k."""
    cur = rule(k)
    x, w = cur.nodes[:, 0], cur.weights.copy()
    if k > 1:
        prev = rule(k - 1)
        where = {_key(v): i for i, v in enumerate(x)}
        for v, pw in zip(prev.nodes[:, 0], prev.weights):
            w[where[_key(v)]] -= pw
    return x, w


def _smolyak_indices(d: int, level: int):
    for k in itertools.product(range(1, level + 2), repeat=d):
        if sum(k) - d <= level:
            yield k


def smolyak(rule, d: int, level: int, elide_boundary: bool = False, max_nodes: int = DEFAULT_MAX_NODES) -> QuadratureGrid:
    """Sparse grid on (-1, 1)^d from tensor products of 1-D rule differences."""
    if isinstance(rule, str):
        try:
            rule = RULES[rule]
        except KeyError:
            raise DomainError(f"unknown rule {rule!r}") from None
    if d < 1 or level < 0:
        raise DomainError(f"need d >= 1 and level >= 0, got d={d}, level={level}")
    if not rule.nested:
        raise CapabilityError(f"Smolyak grids need a nested rule, {rule.kind} is not")
    if rule.kind == "gauss_patterson" and level + 1 > GP_MAX_LEVEL:
        raise CapabilityError(f"level {level} needs Gauss-Patterson level {level + 1} > {GP_MAX_LEVEL}")
    indices = list(_smolyak_indices(d, level))
    bound = sum(math.prod(rule.count(ki) for ki in k) for k in indices)
    if bound > max_nodes:
        raise CapabilityError(f"sparse grid would touch {bound} nodes, cap is {max_nodes}")

    diffs = {}
    acc: dict = {}
    for k in indices:
        parts = []
        for ki in k:
            if ki not in diffs:
                diffs[ki] = _difference(rule, ki)
            parts.append(diffs[ki])
        xs = np.stack(np.meshgrid(*[p[0] for p in parts], indexing="ij"), axis=-1).reshape(-1, d)
        ws = functools.reduce(np.multiply.outer, [p[1] for p in parts]).reshape(-1)
        for x, w in zip(xs, ws):
            key = tuple(_key(v) for v in x)
            if key in acc:
                acc[key][1] += w
            else:
                acc[key] = [x, w]
    keys = sorted(acc)
    nodes = np.array([acc[key][0] for key in keys])
    weights = np.array([acc[key][1] for key in keys])
    if elide_boundary:
        keep = np.all(np.abs(nodes) < 1.0 - MERGE_TOL, axis=1)
        nodes, weights = nodes[keep], weights[keep]
    return QuadratureGrid(nodes, weights, f"smolyak_{rule.kind}", level)


def halton(d: int, count: int) -> QuadratureGrid:
    """First ``count`` Halton points (index 1 onward) mapped to (-1,1)^d, equal weights."""
    if d < 1 or count < 1:
        raise DomainError(f"need d >= 1 and count >= 1, got d={d}, count={count}")
    u = qmc.Halton(d, scramble=False).random(count + 1)[1:]
    return QuadratureGrid(2.0 * u - 1.0, np.full(count, 2.0 ** d / count), "halton", count)
