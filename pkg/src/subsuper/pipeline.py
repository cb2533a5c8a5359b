"""End-to-end pipelines: build operators, certify hypotheses, bracket, iterate.

Each ``run_*`` function fills ``info`` (scalar results for the report) and
``log`` (certificate records) as it goes, so a caller still has the partial
record when a later stage raises.
"""

from __future__ import annotations

import numpy as np

from .errors import HypothesisError
from .exprlang import parse
from .gridfn import Certificate, Grid, GridFunction, Phi, phi_eval, sup_norm
from .hammerstein import (
    H4Witness,
    build_bracket_dual,
    build_lower_solution,
    build_upper_solution,
    discretize_kernel,
    find_r_R,
    gelfand_lower_bound,
    h5_remark_holds,
    make_nemytskii,
    principal_eigenpair,
    theta_witness,
)
from .harnack import (
    PLaplaceProblem,
    build_harnack_bracket,
    check_A1,
    harnack_frame,
    harnack_seminorm,
    shrink_r_for_a2,
)
from .solver import make_bracket, monotone_iterate


def _phi(kind, grid):
    if kind == "integral":
        return Phi.integral(GridFunction.constant(grid, 1.0))
    return Phi.sup()


def _hammerstein_common(cfg, info, log):
    grid = Grid(cfg.n, cfg.rule)
    k = parse(cfg.kernel, {"t", "s"})
    f = parse(cfg.f, {"u"})
    L = discretize_kernel(k, grid, symmetric=cfg.symmetric, log=log)
    F = make_nemytskii(f, cfg.scan, log=log)
    theta = theta_witness(L, log=log)
    info["gelfand_bound"] = gelfand_lower_bound(L, theta)
    eig = principal_eigenpair(L, cfg.eig_tol)
    info.update(lambda1=eig.lambda1, eig_residual=eig.residual, eig_iterations=eig.iterations)
    log.append(Certificate("Gelfand: |L theta| <= lambda1", info["gelfand_bound"] <= eig.lambda1 + 1e-8,
                           eig.lambda1 - info["gelfand_bound"]))
    one = GridFunction.constant(grid, 1.0)
    info["L1_sup"] = sup_norm(L(one))
    return grid, L, F, eig, one


def _check_h3_scalar(F, lambda1, r, scan, log):
    t = scan.samples()
    t = t[t <= lambda1 * r]
    if t.size == 0:
        return
    margin = np.asarray(F.scalar(t)) - t / lambda1
    i = int(np.argmin(margin))
    cert = Certificate("h3: f(t) >= t/lambda1 on [0, lambda1 r]", bool(margin[i] >= 0),
                       float(margin[i]), None, float(t[i]), f"r = {r:.17g} (override)")
    log.append(cert)
    if not cert.passed:
        raise HypothesisError("h3", f"f(t) < t/lambda1 at t = {t[i]:.6g}", margin=cert.margin)


def run_hammerstein(cfg, info, log):
    grid, L, F, eig, one = _hammerstein_common(cfg, info, log)
    ov = cfg.overrides
    r, R = ov.get("r"), ov.get("R")
    if r is None or (R is None and "mu" not in ov):
        r_scan, R_scan = find_r_R(F, eig.lambda1, info["L1_sup"], cfg.scan, log=log)
        r = r_scan if r is None else r
        R = R_scan if R is None else R
    if "r" in ov:
        _check_h3_scalar(F, eig.lambda1, r, cfg.scan, log)
    phi = _phi(cfg.phi, grid)
    # r above is the max-norm radius; rescale so (r/Phi(phi1)) phi1 is unchanged
    r_phi = r * phi_eval(phi, eig.phi1) / sup_norm(eig.phi1)
    mu = (ov["mu"] if "mu" in ov else R) * one
    alpha = ov.get("alpha", info["L1_sup"])
    info.update(r=r, R=R, r_phi=r_phi, mu=float(mu.values[0]), alpha=alpha)

    lower = build_lower_solution(L, eig, r_phi, phi)
    upper = build_upper_solution(L, F, H4Witness(mu, alpha), log=log)
    log.append(h5_remark_holds(eig, r_phi, mu, phi))
    return _solve(lambda u: L(F(u)), lower, upper, cfg, info, log, grid, eig.phi1)


def run_hammerstein_dual(cfg, info, log):
    grid, L, F, eig, one = _hammerstein_common(cfg, info, log)
    ov = cfg.overrides
    mu, alpha, R = ov["mu"] * one, ov["alpha"], ov["R"]
    info.update(R=R, mu=ov["mu"], alpha=alpha)
    lower, upper = build_bracket_dual(L, F, eig, R, H4Witness(mu, alpha), _phi(cfg.phi, grid), log=log)
    return _solve(lambda u: L(F(u)), lower, upper, cfg, info, log, grid, eig.phi1)


def run_p_laplace(cfg, info, log):
    grid = Grid(cfg.n, cfg.rule)
    F = make_nemytskii(parse(cfg.f, {"u"}), cfg.scan, log=log)
    frame = harnack_frame(grid, *cfg.D)
    info.update(D=[frame.a, frame.b], M=frame.M, chi_seminorm=harnack_seminorm(frame.chi, frame))
    log.append(Certificate("||chi|| <= 1", info["chi_seminorm"] <= 1.0, 1.0 - info["chi_seminorm"]))
    prob = PLaplaceProblem(cfg.p, F, grid, frame, cfg.c_tol)
    S1 = prob.S(frame.psi)
    info.update(S1_seminorm=harnack_seminorm(S1, frame), S1_sup=sup_norm(S1))
    ov = cfg.overrides
    r, R = ov.get("r"), ov.get("R")
    if r is None or R is None:
        r_scan, R_scan = check_A1(prob, S1, cfg.scan, log=log)
        if r is None:
            r = shrink_r_for_a2(prob, min(r_scan, R if R is not None else R_scan), cfg.scan, log=log)
        R = R_scan if R is None else R
    info.update(r=r, R=R)
    hb = build_harnack_bracket(prob, r, R, log=log)
    return _solve(prob.N, hb.lower, hb.upper, cfg, info, log, grid, None)


def _solve(N, lower, upper, cfg, info, log, grid, phi1):
    bracket = make_bracket(N, lower, upper)
    log.extend(bracket.certificates)
    report = monotone_iterate(N, bracket, cfg.fp_tol, cfg.max_iter)
    log.extend(report.hypothesis_log[len(bracket.certificates):])
    info.update(
        residual_low=report.residual_low,
        residual_high=report.residual_high,
        iterations=report.iterations,
        iterations_low=report.iterations_low,
        iterations_high=report.iterations_high,
        trace_low=[t["residual"] for t in report.trace_low],
        trace_high=[t["residual"] for t in report.trace_high],
    )
    columns = {
        "t": grid.nodes,
        "lower": lower.values,
        "upper": upper.values,
        "fixed_point_low": report.fixed_point_low.values,
        "fixed_point_high": report.fixed_point_high.values,
    }
    if phi1 is not None:
        columns["phi1"] = phi1.values
    return report, columns


PIPELINES = {
    "hammerstein": run_hammerstein,
    "hammerstein_dual": run_hammerstein_dual,
    "p_laplace": run_p_laplace,
}
