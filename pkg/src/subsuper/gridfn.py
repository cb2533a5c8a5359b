"""Ordered grid functions on [0, 1].

Functions are stored by their values on a uniform grid.  The cone is the
set of nodewise nonnegative vectors, the norm is the max norm (so the
semi-monotonicity constant is 1), and integrals use a fixed composite
rule (trapezoid or Simpson) whose weights sum to one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, GridMismatchError

TOL_ORDER = 1e-12

RULES = ("trapezoid", "simpson")


def _rule_weights(m, h, rule):
    """Composite weights for ``m`` equal intervals of width ``h``.

    Simpson with an odd interval count closes with the 3/8 rule on the last
    three intervals, which keeps exactness on cubics.
    """
    w = np.zeros(m + 1)
    if rule == "trapezoid" or m == 1:
        w[:] = h
        w[0] = w[-1] = h / 2
        return w
    even = m if m % 2 == 0 else m - 3
    if even > 0:
        w[0:even + 1:2] += 2 * h / 3
        w[1:even:2] += 4 * h / 3
        w[0] -= h / 3
        w[even] -= h / 3
    if even != m:
        w[even:] += 3 * h / 8 * np.array([1.0, 3.0, 3.0, 1.0])
    return w


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform grid t_i = i/(n-1) with quadrature weights."""

    n: int = 201
    rule: str = "simpson"
    nodes: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise DomainError(f"grid needs n >= 3 nodes, got {self.n}")
        if self.rule not in RULES:
            raise DomainError(f"unknown quadrature rule {self.rule!r}")
        if self.rule == "simpson" and self.n % 2 == 0:
            raise DomainError(f"Simpson rule needs an odd node count, got {self.n}")
        nodes = np.linspace(0.0, 1.0, self.n)
        weights = _rule_weights(self.n - 1, 1.0 / (self.n - 1), self.rule)
        assert abs(weights.sum() - 1.0) <= 1e-12 and np.all(weights > 0)
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    def __eq__(self, other):
        return isinstance(other, Grid) and (self.n, self.rule) == (other.n, other.rule)

    def __hash__(self):
        return hash((self.n, self.rule))

    @property
    def h(self):
        return 1.0 / (self.n - 1)

    def snap(self, x):
        """Index of the node nearest to ``x``."""
        return int(round(float(x) * (self.n - 1)))

    def segment_weights(self, i0, i1):
        """Weights of the grid rule restricted to nodes i0..i1 (inclusive)."""
        if not 0 <= i0 < i1 <= self.n - 1:
            raise DomainError(f"empty node range [{i0}, {i1}]")
        return _rule_weights(i1 - i0, self.h, self.rule)


@dataclass(frozen=True, eq=False)
class GridFunction:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise DomainError(f"expected {self.grid.n} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise DomainError("grid function has non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_callable(cls, grid, fn):
        return cls(grid, np.broadcast_to(fn(grid.nodes), (grid.n,)))

    @classmethod
    def constant(cls, grid, c):
        return cls(grid, np.full(grid.n, float(c)))

    @property
    def t(self):
        return self.grid.nodes

    def _other(self, other):
        if isinstance(other, GridFunction):
            if other.grid != self.grid:
                raise GridMismatchError(f"{self.grid} vs {other.grid}")
            return other.values
        return other

    def __add__(self, other):
        return GridFunction(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return GridFunction(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return GridFunction(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, c):
        return GridFunction(self.grid, self.values / c)

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    def __len__(self):
        return self.grid.n

    def is_nonnegative(self, tol=TOL_ORDER):
        return bool(np.all(self.values >= -tol))


def _check_same(u, v):
    if u.grid != v.grid:
        raise GridMismatchError(f"{u.grid} vs {v.grid}")


def leq(u, v, tol=TOL_ORDER):
    """Cone order: u <= v iff v - u is nodewise nonnegative (up to ``tol``)."""
    _check_same(u, v)
    return bool(np.all(u.values <= v.values + tol))


def sup_norm(u):
    return float(np.max(np.abs(u.values)))


def integrate(u, a=0.0, b=1.0):
    """Integral of ``u`` over [a, b]; a and b are snapped to the nearest nodes."""
    if not 0.0 <= a < b <= 1.0:
        raise DomainError(f"need 0 <= a < b <= 1, got [{a}, {b}]")
    g = u.grid
    i0, i1 = g.snap(a), g.snap(b)
    if i0 == i1:
        raise DomainError(f"[{a}, {b}] collapses to a single node on n={g.n}")
    if i0 == 0 and i1 == g.n - 1:
        return float(g.weights @ u.values)
    return float(g.segment_weights(i0, i1) @ u.values[i0:i1 + 1])


@dataclass(frozen=True)
class OrderStructure:
    # 0 <= u <= v implies |u| <= gamma |v|; exactly 1 for the max norm
    gamma: float = 1.0


@dataclass(frozen=True, eq=False)
class Phi:
    """Positively homogeneous functional on the cone."""

    kind: str = "sup_norm"
    density: GridFunction | None = None

    def __post_init__(self):
        if self.kind not in ("sup_norm", "weighted_integral"):
            raise DomainError(f"unknown Phi kind {self.kind!r}")
        if self.kind == "weighted_integral":
            d = self.density
            if d is None or not d.is_nonnegative(0.0) or not np.any(d.values > 0):
                raise DomainError("weighted_integral needs a nonnegative, nonzero density")

    @classmethod
    def sup(cls):
        return cls("sup_norm")

    @classmethod
    def integral(cls, density):
        return cls("weighted_integral", density)


def phi_eval(phi, u):
    if phi.kind == "sup_norm":
        return sup_norm(u)
    _check_same(u, phi.density)
    return float(u.grid.weights @ (phi.density.values * u.values))


@dataclass(frozen=True)
class Certificate:
    """Outcome of one hypothesis or order check, as logged in reports."""

    name: str
    passed: bool
    margin: float | None = None
    worst_node: int | None = None
    worst_t: float | None = None
    detail: str = ""

    def as_dict(self):
        return {
            "name": self.name,
            "passed": self.passed,
            "margin": self.margin,
            "worst_node": self.worst_node,
            "worst_t": self.worst_t,
            "detail": self.detail,
        }


def order_certificate(name, u, v, tol=TOL_ORDER, detail=""):
    """Check u <= v nodewise and record the smallest slack min(v - u)."""
    _check_same(u, v)
    gap = v.values - u.values
    i = int(np.argmin(gap))
    margin = float(gap[i])
    return Certificate(name, margin >= -tol, margin, i, float(u.grid.nodes[i]), detail)
