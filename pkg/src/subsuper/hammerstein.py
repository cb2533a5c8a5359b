"""Discrete Hammerstein operators u -> L F(u) and their lower/upper solutions.

L is the Nystrom discretization of an integral operator with a nonnegative
kernel, F the superposition (Nemytskii) operator of a scalar nonlinearity.
The lower solution is built from the principal eigenpair of L, the upper
one from a witness pair (mu, alpha) with L mu <= alpha mu and F(alpha mu) <= mu.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CertificateError,
    ConvergenceError,
    DomainError,
    GridMismatchError,
    HypothesisError,
)
from .exprlang import ExprEvalError, evaluate
from .gridfn import (
    TOL_ORDER,
    Certificate,
    GridFunction,
    Phi,
    order_certificate,
    phi_eval,
    sup_norm,
)


@dataclass(frozen=True)
class ScanConfig:
    """Geometric sample of (0, inf) used for all scalar threshold checks."""

    t_min: float = 1e-8
    t_max: float = 1e8
    points_per_decade: int = 1000

    def __post_init__(self):
        if not 0 < self.t_min < self.t_max or self.points_per_decade < 1:
            raise DomainError(f"invalid scan range {self}")

    def samples(self):
        lo, hi = np.log10(self.t_min), np.log10(self.t_max)
        count = int(round((hi - lo) * self.points_per_decade)) + 1
        return np.logspace(lo, hi, max(count, 2))

    def as_dict(self):
        return {"t_min": self.t_min, "t_max": self.t_max,
                "points_per_decade": self.points_per_decade}


def _log(log, cert):
    if log is not None:
        log.append(cert)
    return cert


@dataclass(frozen=True, eq=False)
class Nemytskii:
    """Pointwise map u -> f(u) with a sampled monotonicity certificate."""

    f: object
    certified: bool = False
    scan: ScanConfig = field(default_factory=ScanConfig)

    def scalar(self, x):
        return evaluate(self.f, {"u": x})

    def __call__(self, u):
        return GridFunction(u.grid, self.scalar(u.values))


def make_nemytskii(f, scan=None, log=None):
    """Certify that f is nonnegative and nondecreasing on {0} and the scan sample.

    Monotonicity is checked between consecutive sorted samples, which covers
    every ordered pair drawn from the sample.
    """
    scan = scan or ScanConfig()
    x = np.concatenate(([0.0], scan.samples()))
    try:
        fx = np.asarray(evaluate(f, {"u": x}), dtype=float)
    except ExprEvalError as exc:
        raise HypothesisError("h2", f"f is not defined on the scan range: {exc}") from exc
    if np.any(np.isnan(fx)):
        i = int(np.argmax(np.isnan(fx)))
        raise HypothesisError("h2", f"f({x[i]:.6g}) is NaN", worst_node=i)
    neg = fx < 0
    if np.any(neg):
        i = int(np.argmax(neg))
        _log(log, Certificate("f>=0", False, float(fx[i]), i, float(x[i])))
        raise HypothesisError("h2", f"f({x[i]:.6g}) = {fx[i]:.6g} < 0", margin=float(fx[i]))
    with np.errstate(invalid="ignore"):
        steps = np.diff(fx)
    steps[np.isnan(steps)] = 0.0  # inf - inf at the top of the range
    slack = steps + 1e-12 * (1.0 + np.abs(fx[:-1]))
    i = int(np.argmin(slack))
    cert = Certificate("h2: f nondecreasing (sampled)", bool(slack[i] >= 0), float(steps[i]),
                       i, float(x[i]), f"{x.size} samples on [0, {scan.t_max:g}]")
    _log(log, cert)
    if not cert.passed:
        raise HypothesisError(
            "h2", f"f decreases between u={x[i]:.6g} and u={x[i + 1]:.6g}", margin=float(steps[i]))
    return Nemytskii(f, True, scan)


@dataclass(frozen=True, eq=False)
class DiscreteLinearOperator:
    """(L u)_i = sum_j k(t_i, s_j) w_j u_j."""

    grid: object
    kmat: np.ndarray

    def __post_init__(self):
        k = np.array(self.kmat, dtype=float)
        k.setflags(write=False)
        object.__setattr__(self, "kmat", k)
        a = k * self.grid.weights[None, :]
        a.setflags(write=False)
        object.__setattr__(self, "_matrix", a)

    @property
    def matrix(self):
        """The weighted matrix actually applied to nodal values."""
        return self._matrix

    def __call__(self, u):
        return apply_L(self, u)


def discretize_kernel(k, grid, symmetric=False, log=None):
    T, S = np.meshgrid(grid.nodes, grid.nodes, indexing="ij")
    kmat = np.asarray(evaluate(k, {"t": T, "s": S}), dtype=float)
    if not np.all(np.isfinite(kmat)):
        raise HypothesisError("h1", "kernel takes non-finite values on the grid")
    i, j = np.unravel_index(int(np.argmin(kmat)), kmat.shape)
    cert = Certificate("h1: kernel >= 0", bool(kmat[i, j] >= 0), float(kmat[i, j]), int(i),
                       float(grid.nodes[i]), f"worst s = {grid.nodes[j]:.6g}")
    _log(log, cert)
    if not cert.passed:
        raise HypothesisError(
            "h1", f"k({grid.nodes[i]:.6g}, {grid.nodes[j]:.6g}) = {kmat[i, j]:.6g} < 0"
            " violates cone invariance", margin=cert.margin, worst_node=int(i))
    if symmetric:
        asym = float(np.max(np.abs(kmat - kmat.T)))
        _log(log, Certificate("kernel symmetric", asym <= 1e-10, -asym))
        if asym > 1e-10:
            raise HypothesisError("h1", f"kernel declared symmetric but |k - k^T| = {asym:.3g}")
    return DiscreteLinearOperator(grid, kmat)


def apply_L(L, u):
    if u.grid != L.grid:
        raise GridMismatchError(f"{u.grid} vs {L.grid}")
    return GridFunction(L.grid, L.matrix @ u.values)


@dataclass(frozen=True)
class EigenPair:
    lambda1: float
    phi1: GridFunction
    residual: float
    iterations: int = 0


def principal_eigenpair(L, eig_tol=1e-12, max_iter=10_000):
    """Power iteration from the constant function, normalized in the max norm."""
    phi = GridFunction.constant(L.grid, 1.0)
    residual = np.inf
    for it in range(1, max_iter + 1):
        v = L(phi).values
        lam = float(np.max(np.abs(v)))
        if lam == 0.0:
            raise HypothesisError("h1", "L annihilates the iterate: zero operator on the cone")
        residual = float(np.max(np.abs(v - lam * phi.values)))
        if residual <= eig_tol:
            return EigenPair(lam, phi, residual, it)
        phi = GridFunction(L.grid, v / lam)
    raise ConvergenceError(
        f"power iteration did not reach {eig_tol:g} in {max_iter} steps", residual, max_iter)


def gelfand_lower_bound(L, theta):
    """|L theta|_inf, a lower bound on the spectral radius when theta satisfies (H1)."""
    if not theta.is_nonnegative():
        raise DomainError("theta must be nonnegative")
    return sup_norm(L(theta))


def theta_witness(L, log=None):
    """Pointwise largest theta with k(t, s) >= theta(t) k(q, s) on the grid.

    theta_i = min_j k_ij / max_q k_qj over columns j that are not identically
    zero; pairs with k_qj = 0 impose no constraint.
    """
    k = L.kmat
    colmax = k.max(axis=0)
    active = colmax > 0
    if not np.any(active):
        theta = np.zeros(L.grid.n)
    else:
        theta = (k[:, active] / colmax[active]).min(axis=1)
    viol = float(np.max(theta[:, None] * colmax[None, :] - k)) if np.any(active) else 0.0
    assert viol <= 1e-12 * max(1.0, float(k.max())), viol
    theta_fn = GridFunction(L.grid, theta)
    bound = sup_norm(L(theta_fn))
    cert = _log(log, Certificate("H1: |L theta| > 0", bound > 0, bound, detail="Green-type inequality"))
    if not cert.passed:
        diag = float(np.min(np.diag(k)))
        hint = (f"; min_t k(t,t) = {diag:.6g} > 0 also yields a positive eigenvalue"
                if diag > 0 else "")
        raise HypothesisError("H1", "|L theta|_inf = 0, spectral radius not certified" + hint,
                              margin=bound)
    return theta_fn


def find_r_R(F, lambda1, L1_sup, scan=None, log=None):
    """Scalar thresholds behind (h3) and (h4).

    r: f(t) >= t/lambda1 for all sampled t in [0, lambda1 r]  (largest such r)
    R: f(t) <= t/L1_sup for all sampled t >= L1_sup R          (smallest such R)

    Any smaller r stays admissible, so r is clipped to R when the largest
    admissible value exceeds it.
    """
    if lambda1 <= 0 or L1_sup <= 0:
        raise DomainError("lambda1 and |L1|_inf must be positive")
    scan = scan or F.scan
    t = scan.samples()
    ft = np.asarray(F.scalar(t), dtype=float)

    low = ft - t / lambda1
    if low[0] < 0:
        _log(log, Certificate("H2 at 0: f(t) >= t/lambda1", False, float(low[0]), 0, float(t[0])))
        raise HypothesisError(
            "H2", f"no admissible r: f({t[0]:.3g}) = {ft[0]:.6g} < t/lambda1 = {t[0] / lambda1:.6g}",
            margin=float(low[0]))
    fails = np.flatnonzero(low < 0)
    top = t[fails[0] - 1] if fails.size else t[-1]
    r = float(top / lambda1)

    high = t / L1_sup - ft
    if not high[-1] >= 0:
        _log(log, Certificate("H2 at inf: f(t) <= t/|L1|", False, float(high[-1]), None, float(t[-1])))
        raise HypothesisError(
            "H2", f"no admissible R: f({t[-1]:.3g}) = {ft[-1]:.6g} > t/|L1|_inf", margin=float(high[-1]))
    bad = np.flatnonzero(~(high >= 0))
    k = bad[-1] + 1 if bad.size else 0
    R = float(t[k] / L1_sup)
    # rounding in t/L1_sup*L1_sup may land just past the sampled point
    while F.scalar(L1_sup * R) > R and k + 1 < t.size:
        k += 1
        R = float(t[k] / L1_sup)

    _log(log, Certificate("H2 at 0: f(t) >= t/lambda1 on [0, lambda1 r]", True,
                          float(low[: (fails[0] if fails.size else t.size)].min()),
                          detail=f"r = {r:.17g}"))
    _log(log, Certificate("H2 at inf: f(t) <= t/|L1| for t >= |L1| R", True,
                          float(high[k:].min()), detail=f"R = {R:.17g}"))
    return min(r, R), R


def build_lower_solution(L, eig, r, phi=None):
    """u_low = (r / Phi(phi1)) L phi1."""
    phi = phi or Phi.sup()
    if r <= 0:
        raise DomainError(f"r must be positive, got {r}")
    scale = phi_eval(phi, eig.phi1)
    if scale <= 0:
        raise DomainError("Phi(phi1) = 0 contradicts definiteness of Phi")
    return (r / scale) * L(eig.phi1)


def subeigen_ratio(L, phi):
    """Largest lambda with L phi >= lambda phi nodewise (over nodes with phi > 0)."""
    pos = phi.values > 0
    if not np.any(pos):
        raise DomainError("phi must be nonzero")
    return float(np.min(L(phi).values[pos] / phi.values[pos]))


def build_lower_solution_general(L, phi_fn, lam, r, phi=None, log=None):
    """u_low = (r / Phi(phi)) L phi for any phi >= 0, phi != 0 with L phi >= lam phi."""
    phi = phi or Phi.sup()
    if r <= 0 or lam <= 0:
        raise DomainError("r and lambda must be positive")
    if not phi_fn.is_nonnegative() or sup_norm(phi_fn) == 0:
        raise DomainError("phi must lie in the cone minus zero")
    Lphi = L(phi_fn)
    cert = _log(log, order_certificate("L phi >= lambda phi", lam * phi_fn, Lphi))
    if not cert.passed:
        raise CertificateError("h1", f"L phi >= {lam:.6g} phi fails at t = {cert.worst_t:.6g}",
                               margin=cert.margin, worst_node=cert.worst_node)
    scale = phi_eval(phi, phi_fn)
    if scale <= 0:
        raise DomainError("Phi(phi) = 0 contradicts definiteness of Phi")
    return (r / scale) * Lphi


@dataclass(frozen=True)
class H4Witness:
    mu: GridFunction
    alpha: float


def _check_witness(mu, alpha):
    if alpha <= 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    if not mu.is_nonnegative() or sup_norm(mu) == 0:
        raise DomainError("mu must lie in the cone minus zero")


def build_upper_solution(L, F, w, log=None, tol=TOL_ORDER):
    """u_up = L mu, given L mu <= alpha mu and F(alpha mu) <= mu."""
    _check_witness(w.mu, w.alpha)
    Lmu = L(w.mu)
    for cert in (order_certificate("h4: L mu <= alpha mu", Lmu, w.alpha * w.mu, tol),
                 order_certificate("h4: F(alpha mu) <= mu", F(w.alpha * w.mu), w.mu, tol)):
        _log(log, cert)
        if not cert.passed:
            raise CertificateError("h4", f"{cert.name} fails at t = {cert.worst_t:.6g}",
                                   margin=cert.margin, worst_node=cert.worst_node)
    return Lmu


def h5_remark_holds(eig, r, mu, phi=None):
    """Sufficient comparability test: (r / Phi(phi1)) phi1 <= mu."""
    phi = phi or Phi.sup()
    return order_certificate("h5: (r/Phi(phi1)) phi1 <= mu",
                             (r / phi_eval(phi, eig.phi1)) * eig.phi1, mu)


def build_bracket_dual(L, F, eig, R, w, phi=None, log=None, tol=TOL_ORDER):
    """Dual construction: lower = L mu, upper = (R / Phi(phi1)) L phi1.

    Needs L mu >= alpha mu, F(alpha mu) >= mu and F(lambda1 c) <= c for the
    constant c with Phi(c) = R.
    """
    phi = phi or Phi.sup()
    _check_witness(w.mu, w.alpha)
    if R <= 0:
        raise DomainError(f"R must be positive, got {R}")
    Lmu = L(w.mu)
    checks = [("h4'", order_certificate("h4': L mu >= alpha mu", w.alpha * w.mu, Lmu, tol)),
              ("h4'", order_certificate("h4': F(alpha mu) >= mu", w.mu, F(w.alpha * w.mu), tol))]
    one = GridFunction.constant(L.grid, 1.0)
    c = (R / phi_eval(phi, one)) * one
    checks.append(("h3'", order_certificate("h3': F(lambda1 c) <= c, Phi(c) = R",
                                            F(eig.lambda1 * c), c, tol)))
    for name, cert in checks:
        _log(log, cert)
        if not cert.passed:
            raise CertificateError(name, f"{cert.name} fails at t = {cert.worst_t:.6g}",
                                   margin=cert.margin, worst_node=cert.worst_node)
    upper = (R / phi_eval(phi, eig.phi1)) * L(eig.phi1)
    return Lmu, upper
