"""Harnack-type brackets for u = N(u), instantiated for the 1-D p-Laplacian.

The solution operator S of -(phi_p(u'))' = h, u(0) = u(1) = 0 is computed by
direct quadrature: phi_p(u') = c - H with H(t) = int_0^t h, and the scalar c
is fixed by bisection so that u(1) = 0.  For h >= 0 the result is concave,
which gives the explicit Harnack constant

    inf_D u >= min(a, 1 - b) sup u >= min(a, 1 - b)/(b - a) * int_D u

on D = [a, b].  With the seminorm ||u|| = M int_D u, chi = 1_D and psi = 1,
the pair (r chi, R) is a lower/upper pair for N = S F.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CertificateError, ConvergenceError, DomainError, HypothesisError
from .gridfn import (
    TOL_ORDER,
    Certificate,
    GridFunction,
    integrate,
    order_certificate,
    sup_norm,
)
from .hammerstein import _log


def phi_p(s, p):
    s = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(s == 0, 0.0, np.abs(s) ** (p - 2) * s)
    return out if out.ndim else float(out)


def phi_p_inv(s, p):
    s = np.asarray(s, dtype=float)
    out = np.sign(s) * np.abs(s) ** (1.0 / (p - 1))
    return out if out.ndim else float(out)


def _cumtrapz(y, h):
    out = np.empty_like(y)
    out[0] = 0.0
    np.cumsum((y[1:] + y[:-1]) * (h / 2), out=out[1:])
    return out


def solve_p_laplace(h, p, grid=None, c_tol=1e-12, max_bisect=200):
    """u = S(h): the solution of -(phi_p(u'))' = h with u(0) = u(1) = 0."""
    if p <= 1:
        raise DomainError(f"p must exceed 1, got {p}")
    grid = grid or h.grid
    if h.grid != grid:
        raise DomainError("h lives on a different grid")
    H = _cumtrapz(h.values, grid.h)

    def profile(c):
        return _cumtrapz(phi_p_inv(c - H, p), grid.h)

    lo, hi = float(H.min()), float(H.max())
    if lo == hi:
        return GridFunction(grid, np.zeros(grid.n))
    # c -> u(1) is increasing, nonpositive at min H and nonnegative at max H
    u_lo, u_hi = profile(lo), profile(hi)
    if u_lo[-1] > 0 or u_hi[-1] < 0:
        raise ConvergenceError(f"bisection for c not bracketed: u(1) in [{u_lo[-1]}, {u_hi[-1]}]")
    for _ in range(max_bisect):
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        u_mid = profile(mid)
        if u_mid[-1] > 0:
            hi, u_hi = mid, u_mid
        elif u_mid[-1] < 0:
            lo, u_lo = mid, u_mid
        else:
            u_lo = u_hi = u_mid
            break
    u = u_lo if abs(u_lo[-1]) <= abs(u_hi[-1]) else u_hi
    scale = max(1.0, float(np.max(np.abs(u))))
    if abs(u[-1]) > c_tol * scale:
        raise ConvergenceError(f"u(1) = {u[-1]:.3g} after bisection exceeds c_tol", abs(u[-1]))
    # pin u(1) = 0 exactly; subtracting a linear term keeps concavity
    u = u - grid.nodes * u[-1]
    return GridFunction(grid, u)


def harnack_constant(a, b):
    """M = min(a, 1 - b)/(b - a): inf_D u >= M int_D u for concave u >= 0 vanishing at 0, 1."""
    if not 0 < a < b < 1:
        raise DomainError(f"need 0 < a < b < 1, got D = [{a}, {b}]")
    return min(a, 1.0 - b) / (b - a)


@dataclass(frozen=True, eq=False)
class HarnackFrame:
    """Seminorm region D = [a, b] (snapped to nodes), constant M, chi = 1_D, psi = 1."""

    grid: object
    a: float
    b: float
    i0: int
    i1: int
    M: float
    chi: GridFunction = field(repr=False)
    psi: GridFunction = field(repr=False)


def harnack_frame(grid, a=0.25, b=0.75):
    i0, i1 = grid.snap(a), grid.snap(b)
    a_s, b_s = float(grid.nodes[i0]), float(grid.nodes[i1])
    M = harnack_constant(a_s, b_s)
    chi = np.zeros(grid.n)
    chi[i0:i1 + 1] = 1.0
    # ||chi|| = M (b - a) = min(a, 1 - b) must not exceed 1
    assert M * integrate(GridFunction(grid, chi), a_s, b_s) <= 1.0 + 1e-12
    return HarnackFrame(grid, a_s, b_s, i0, i1, M, GridFunction(grid, chi),
                        GridFunction.constant(grid, 1.0))


def harnack_seminorm(u, frame):
    return frame.M * integrate(u, frame.a, frame.b)


def a1_certificate(u, frame, tol=TOL_ORDER):
    """Harnack inequality u >= ||u|| chi, checked nodewise."""
    return order_certificate("a1: N(u) >= ||N(u)|| chi", harnack_seminorm(u, frame) * frame.chi,
                             u, tol)


@dataclass(frozen=True, eq=False)
class PLaplaceProblem:
    p: float
    F: object
    grid: object
    frame: HarnackFrame
    c_tol: float = 1e-12

    def __post_init__(self):
        if self.p <= 1:
            raise DomainError(f"p must exceed 1, got {self.p}")

    def S(self, h):
        return solve_p_laplace(h, self.p, self.grid, self.c_tol)

    def N(self, u):
        return self.S(self.F(u))

    __call__ = N


def check_A1(prob, S1, scan=None, log=None):
    """Scan for 0 < r <= R with f(r) >= (r/||S1||)^(p-1) and f(R) <= (R/|S1|)^(p-1).

    Returns the pair closest together: the smallest admissible R not below the
    smallest admissible r, and the largest admissible r not above that R.
    """
    scan = scan or prob.F.scan
    p = prob.p
    semi, top = harnack_seminorm(S1, prob.frame), sup_norm(S1)
    if semi <= 0 or top <= 0:
        raise HypothesisError("A1", "S1 vanishes on D")
    t = scan.samples()
    ft = np.asarray(prob.F.scalar(t), dtype=float)
    low_margin = ft - (t / semi) ** (p - 1)
    high_margin = (t / top) ** (p - 1) - ft
    ok_r = np.flatnonzero(low_margin >= 0)
    ok_R = np.flatnonzero(high_margin >= 0)
    if ok_r.size == 0:
        i = int(np.argmax(low_margin))
        raise HypothesisError("A1", f"no admissible r: best margin {low_margin[i]:.3g} at r = {t[i]:.3g}",
                              margin=float(low_margin[i]))
    if ok_R.size == 0:
        i = int(np.argmax(high_margin))
        raise HypothesisError("A1", f"no admissible R: best margin {high_margin[i]:.3g} at R = {t[i]:.3g}",
                              margin=float(high_margin[i]))
    above = ok_R[ok_R >= ok_r[0]]
    if above.size == 0:
        raise HypothesisError("A1", f"r > R: smallest admissible r = {t[ok_r[0]]:.6g} exceeds every "
                              f"admissible R (largest {t[ok_R[-1]]:.6g})")
    k_R = int(above[0])
    k_r = int(ok_r[ok_r <= k_R][-1])
    r, R = float(t[k_r]), float(t[k_R])
    _log(log, Certificate("A1: f(r) >= (r/||S1||)^(p-1)", True, float(low_margin[k_r]),
                          detail=f"r = {r:.17g}, ||S1|| = {semi:.17g}"))
    _log(log, Certificate("A1: f(R) <= (R/|S1|)^(p-1)", True, float(high_margin[k_R]),
                          detail=f"R = {R:.17g}, |S1| = {top:.17g}"))
    return r, R


def a2_margin(prob, r):
    return harnack_seminorm(prob.N(r * prob.frame.chi), prob.frame) - r


def shrink_r_for_a2(prob, r, scan=None, log=None):
    """Walk down the scan sample from r until ||N(r chi)|| >= r holds directly.

    The scalar (A1) test only bounds ||N(r chi)|| from above when f(0) < f(r),
    since F(r chi) equals f(0), not f(r), off D.
    """
    scan = scan or prob.F.scan
    t = scan.samples()
    candidates = np.concatenate(([r], t[t < r][::-1]))
    for cand in candidates:
        m = a2_margin(prob, float(cand))
        if m >= -TOL_ORDER:
            if cand != r:
                _log(log, Certificate("a2: r reduced for direct certificate", True, m,
                                      detail=f"r {r:.17g} -> {cand:.17g}"))
            return float(cand)
    raise HypothesisError("a2", f"no r <= {r:.6g} on the scan satisfies ||N(r chi)|| >= r")


@dataclass(frozen=True, eq=False)
class HarnackBracket:
    r: float
    R: float
    lower: GridFunction
    upper: GridFunction
    certificates: tuple = ()


def build_harnack_bracket(prob, r, R, log=None, tol=TOL_ORDER):
    """lower = r chi, upper = R psi after direct checks of (a2) and (a3)."""
    if not 0 < r <= R:
        raise DomainError(f"need 0 < r <= R, got r = {r}, R = {R}")
    frame = prob.frame
    lower, upper = r * frame.chi, R * frame.psi
    N_low, N_up = prob.N(lower), prob.N(upper)
    a2 = harnack_seminorm(N_low, frame) - r
    a3 = R - sup_norm(N_up)
    certs = [
        ("a2", Certificate("a2: ||N(r chi)|| >= r", a2 >= -tol, a2, detail=f"r = {r:.17g}")),
        ("a3", Certificate("a3: |N(R psi)| <= R", a3 >= -tol, a3, detail=f"R = {R:.17g}")),
        ("a2", order_certificate("lower <= N(lower)", lower, N_low, tol)),
        ("a3", order_certificate("N(upper) <= upper", N_up, upper, tol)),
        ("u_low <= u_up", order_certificate("lower <= upper", lower, upper, tol)),
    ]
    for name, cert in certs:
        _log(log, cert)
        if not cert.passed:
            raise CertificateError(name, f"{cert.name} fails with margin {cert.margin:.3g}",
                                   margin=cert.margin, worst_node=cert.worst_node)
    return HarnackBracket(r, R, lower, upper, tuple(c for _, c in certs))
