"""Monotone iteration inside a certified order interval [lower, upper].

Starting from a lower solution the iterates u_{k+1} = N(u_k) increase, from an
upper solution they decrease; both stay inside the bracket when N is order
preserving.  The two limits are the least and greatest fixed points in the
bracket (on a grid, bounded monotone sequences converge nodewise).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CertificateError, ConvergenceError
from .gridfn import TOL_ORDER, order_certificate, sup_norm

CERT_TOL = 1e-10


class ConsistencyError(ConvergenceError):
    """An iterate broke monotonicity or left the bracket."""


@dataclass(frozen=True, eq=False)
class Bracket:
    lower: object
    upper: object
    lower_certificate: object
    upper_certificate: object
    comparable: object

    @property
    def verified(self):
        return all(c.passed for c in self.certificates)

    @property
    def certificates(self):
        return (self.lower_certificate, self.upper_certificate, self.comparable)


def make_bracket(N, lower, upper, tol=CERT_TOL):
    """Certify lower <= N(lower), N(upper) <= upper and lower <= upper."""
    return Bracket(
        lower,
        upper,
        order_certificate("lower solution: u_low <= N(u_low)", lower, N(lower), tol),
        order_certificate("upper solution: N(u_up) <= u_up", N(upper), upper, tol),
        order_certificate("comparable: u_low <= u_up", lower, upper, tol),
    )


@dataclass
class SolveReport:
    fixed_point_low: object
    fixed_point_high: object
    residual_low: float
    residual_high: float
    iterations_low: int
    iterations_high: int
    trace_low: list = field(default_factory=list)
    trace_high: list = field(default_factory=list)
    hypothesis_log: list = field(default_factory=list)

    @property
    def iterations(self):
        return max(self.iterations_low, self.iterations_high)


def residual(N, u):
    return sup_norm(N(u) - u)


def _sequence(N, start, lower, upper, ascending, fp_tol, max_iter, tol):
    u = start
    trace = []
    step = np.inf
    for k in range(1, max_iter + 1):
        v = N(u)
        step = sup_norm(v - u)
        d = v.values - u.values
        monotone = bool(np.all(d >= -tol)) if ascending else bool(np.all(d <= tol))
        inside = bool(np.all(v.values >= lower.values - tol) and np.all(v.values <= upper.values + tol))
        trace.append({"iteration": k, "residual": step, "monotone": monotone, "in_bracket": inside})
        if not (monotone and inside):
            kind = "ascending" if ascending else "descending"
            raise ConsistencyError(
                f"{kind} iterate {k} violates {'monotonicity' if not monotone else 'the bracket'}"
                " (false certificate or grid too coarse)", step, k)
        u = v
        if step <= fp_tol:
            return u, k, trace
    raise ConvergenceError(
        f"monotone iteration stalled at step size {step:.3g} > {fp_tol:g} after {max_iter} steps",
        step, max_iter)


def monotone_iterate(N, bracket, fp_tol=1e-10, max_iter=100_000, tol=TOL_ORDER):
    """Iterate N from both ends of a verified bracket; return the extremal fixed points."""
    for cert in bracket.certificates:
        if not cert.passed:
            raise CertificateError("h5" if cert.name.startswith("comparable") else "bracket",
                                   f"{cert.name} failed (margin {cert.margin:.3g})",
                                   margin=cert.margin, worst_node=cert.worst_node)
    low, it_low, tr_low = _sequence(N, bracket.lower, bracket.lower, bracket.upper,
                                    True, fp_tol, max_iter, tol)
    high, it_high, tr_high = _sequence(N, bracket.upper, bracket.lower, bracket.upper,
                                       False, fp_tol, max_iter, tol)
    sandwich = order_certificate("fixed_point_low <= fixed_point_high", low, high, tol)
    if not sandwich.passed:
        raise ConsistencyError(f"extremal fixed points cross (margin {sandwich.margin:.3g})")
    return SolveReport(low, high, residual(N, low), residual(N, high), it_low, it_high,
                       tr_low, tr_high, list(bracket.certificates) + [sandwich])
