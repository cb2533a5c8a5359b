import itertools

import numpy as np
import pytest

from subsuper.errors import CertificateError, ConvergenceError, DomainError, HypothesisError
from subsuper.exprlang import parse
from subsuper.gridfn import Grid, GridFunction, Phi, leq, sup_norm
from subsuper.hammerstein import (
    DiscreteLinearOperator,
    H4Witness,
    ScanConfig,
    build_bracket_dual,
    build_lower_solution,
    build_lower_solution_general,
    build_upper_solution,
    discretize_kernel,
    find_r_R,
    gelfand_lower_bound,
    h5_remark_holds,
    make_nemytskii,
    principal_eigenpair,
    subeigen_ratio,
    theta_witness,
)

from conftest import GREEN

rng = np.random.default_rng(20261015)


def K(src, grid):
    return discretize_kernel(parse(src, {"t", "s"}), grid)


def F(src, scan=None):
    return make_nemytskii(parse(src, {"u"}), scan)


def dense_spectral_radius(L):
    return float(np.max(np.abs(np.linalg.eigvals(L.matrix))))


def random_ordered_pair(grid):
    u = GridFunction(grid, rng.uniform(0, 2, grid.n))
    return u, u + GridFunction(grid, rng.uniform(0, 1, grid.n) * (rng.uniform(size=grid.n) < 0.7))


# ---- discretization and L ---------------------------------------------------

def test_constant_kernel(grid):
    L = K("1", grid)
    assert np.all(L.kmat == 1)
    u = GridFunction.from_callable(grid, lambda t: t)
    assert np.allclose(L(u).values, 0.5, atol=1e-12)
    assert sup_norm(L(0 * u)) == 0


def test_green_L1_at_midpoint(grid, green):
    L = discretize_kernel(green, grid)
    # int_0^1 k(1/2, s) ds = 1/8
    assert L(GridFunction.constant(grid, 1)).values[100] == pytest.approx(0.125, abs=1e-4)


def test_negative_kernel_rejected(grid):
    with pytest.raises(HypothesisError) as info:
        K("-1", grid)
    assert info.value.hypothesis == "h1"
    with pytest.raises(HypothesisError):
        K("t - s", grid)


def test_symmetry_flag(grid):
    discretize_kernel(parse(GREEN, {"t", "s"}), grid, symmetric=True)
    with pytest.raises(HypothesisError):
        discretize_kernel(parse("t*s^2", {"t", "s"}), grid, symmetric=True)


def test_L_order_preserving(grid, green):
    L = discretize_kernel(green, grid)
    for _ in range(200):
        u, v = random_ordered_pair(grid)
        assert leq(L(u), L(v), 0.0)


def test_nemytskii_monotone_and_certified(grid):
    f = F("sqrt(u) + 0.1")
    assert f.certified
    for _ in range(200):
        u, v = random_ordered_pair(grid)
        assert leq(f(u), f(v), 0.0)


@pytest.mark.parametrize("src", ["-u", "sin(u)", "u - 1", "sqrt(u - 1)", "1/(u+1)"])
def test_nemytskii_rejects(src):
    with pytest.raises(HypothesisError) as info:
        F(src)
    assert info.value.hypothesis == "h2"


# ---- eigenpair -------------------------------------------------------------

def test_eigenpair_constant_kernel(grid):
    e = principal_eigenpair(K("1", grid))
    assert e.lambda1 == pytest.approx(1, abs=1e-14)
    assert np.allclose(e.phi1.values, 1)


def test_eigenpair_green():
    g = Grid(401)
    L = K(GREEN, g)
    e = principal_eigenpair(L)
    assert e.lambda1 == pytest.approx(dense_spectral_radius(L), abs=1e-12)
    assert abs(e.lambda1 - 1 / np.pi**2) <= 1e-4
    assert np.max(np.abs(e.phi1.values - np.sin(np.pi * g.nodes))) <= 1e-3
    assert e.residual <= 1e-12
    assert sup_norm(L(e.phi1) - e.lambda1 * e.phi1) <= 1e-12


def test_eigenpair_rank_one(grid):
    e = principal_eigenpair(K("t*s", grid))
    assert e.lambda1 == pytest.approx(1 / 3, abs=1e-12)
    assert np.allclose(e.phi1.values, grid.nodes, atol=1e-12)


def test_eigenpair_zero_operator(grid):
    with pytest.raises(HypothesisError):
        principal_eigenpair(K("0", grid))


def test_eigenpair_non_convergence(grid):
    with pytest.raises(ConvergenceError) as info:
        principal_eigenpair(K(GREEN, grid), eig_tol=1e-30, max_iter=5)
    assert info.value.residual > 0


# ---- theta and the Gelfand bound --------------------------------------------

def brute_theta(kmat):
    n = kmat.shape[0]
    theta = np.full(n, np.inf)
    for i, j, q in itertools.product(range(n), repeat=3):
        if kmat[q, j] > 0:
            theta[i] = min(theta[i], kmat[i, j] / kmat[q, j])
    theta[np.isinf(theta)] = 0.0
    return theta


@pytest.mark.parametrize("src", ["1", "t*s + 1", GREEN, "exp(-(t-s)^2)"])
def test_theta_matches_brute_force(src):
    g = Grid(15)
    L = K(src, g)
    theta = theta_witness(L)
    assert np.allclose(theta.values, brute_theta(L.kmat), rtol=1e-13, atol=0)
    k = L.kmat
    for i, j, q in itertools.product(range(g.n), repeat=3):
        assert k[i, j] >= theta.values[i] * k[q, j] - 1e-15


def test_theta_examples(grid):
    assert np.allclose(theta_witness(K("1", grid)).values, 1)
    th = theta_witness(K("t*s + 1", grid))
    assert np.all(th.values > 0)
    tg = theta_witness(K(GREEN, grid))
    assert tg.values[0] == 0 and tg.values[-1] == 0 and np.all(tg.values[1:-1] > 0)


def test_theta_not_certifiable(grid):
    # two decoupled blocks: every row misses an active column, so theta = 0
    kmat = np.zeros((grid.n, grid.n))
    h = grid.n // 2
    kmat[:h, :h] = 1.0
    kmat[h:, h:] = 1.0
    with pytest.raises(HypothesisError) as info:
        theta_witness(DiscreteLinearOperator(grid, kmat))
    assert info.value.hypothesis == "H1"
    assert "k(t,t)" in str(info.value)
    # power iteration still finds the (near 1/2) spectral radius
    e = principal_eigenpair(DiscreteLinearOperator(grid, kmat))
    assert e.lambda1 == pytest.approx(dense_spectral_radius(DiscreteLinearOperator(grid, kmat)), rel=1e-10)


def test_gelfand_examples(grid):
    L = K("1", grid)
    assert gelfand_lower_bound(L, GridFunction.constant(grid, 1)) == pytest.approx(1, abs=1e-14)
    assert gelfand_lower_bound(L, GridFunction.constant(grid, 0)) == 0
    Lg = K(GREEN, grid)
    assert gelfand_lower_bound(Lg, theta_witness(Lg)) <= principal_eigenpair(Lg).lambda1


@pytest.mark.parametrize("src", ["1", "t*s+1", GREEN, "exp(-3*(t-s)^2)", "1 + sin(3*t*s)^2", "t+s"])
def test_gelfand_consistency(src, grid):
    L = K(src, grid)
    e = principal_eigenpair(L)
    assert gelfand_lower_bound(L, theta_witness(L)) <= e.lambda1 + 1e-12


# ---- thresholds -------------------------------------------------------------

SCAN = ScanConfig()
STEP = 10 ** (1 / SCAN.points_per_decade)


def test_find_r_R_sqrt_green():
    lam, L1 = 1 / np.pi**2, 0.125
    r, R = find_r_R(F("sqrt(u)"), lam, L1)
    # sqrt(t) >= t/lam iff t <= lam^2, so r_max = lam; sqrt(t) <= t/L1 iff t >= L1^2, so R_min = L1
    assert lam / STEP <= r <= lam
    assert L1 <= R <= L1 * STEP
    assert 0 < r <= R


def test_find_r_R_no_admissible_r():
    with pytest.raises(HypothesisError, match="no admissible r") as info:
        find_r_R(F("u/2"), 1.0, 1.0)
    assert info.value.hypothesis == "H2"


def test_find_r_R_no_admissible_R():
    with pytest.raises(HypothesisError, match="no admissible R"):
        find_r_R(F("u^2 + 1"), 1.0, 1.0)


@pytest.mark.parametrize("c", [0.3, 2.0])
def test_find_r_R_constant(c):
    lam, L1 = 0.5, 0.25
    r, R = find_r_R(F(str(c)), lam, L1)
    # f = c >= t/lam on [0, lam r] iff r <= c; c <= t/L1 for t >= L1 R iff R >= c
    assert c <= R <= c * STEP
    assert c / STEP <= r <= c


# ---- lower and upper solutions ----------------------------------------------

def test_lower_solution_constant_kernel(grid):
    L = K("1", grid)
    e = principal_eigenpair(L)
    assert np.allclose(build_lower_solution(L, e, 2.0).values, 2.0)
    with pytest.raises(DomainError):
        build_lower_solution(L, e, 0.0)


def test_lower_solution_green(grid, green):
    L = discretize_kernel(green, grid)
    e = principal_eigenpair(L)
    low = build_lower_solution(L, e, 1.0)
    assert np.allclose(low.values, e.lambda1 * e.phi1.values, atol=1e-12)
    assert low.values[100] == pytest.approx(1 / np.pi**2, abs=1e-4)


def test_lower_solution_general(grid, green):
    L = discretize_kernel(green, grid)
    e = principal_eigenpair(L)
    same = build_lower_solution_general(L, e.phi1, e.lambda1 * (1 - 1e-12), 0.7)
    assert np.allclose(same.values, build_lower_solution(L, e, 0.7).values, atol=1e-15)

    phi = GridFunction.from_callable(grid, lambda t: t * (1 - t))
    lam = subeigen_ratio(L, phi)
    inner = phi.values > 0
    assert lam == pytest.approx(np.min(L(phi).values[inner] / phi.values[inner]))
    assert 0 < lam <= e.lambda1
    log = []
    low = build_lower_solution_general(L, phi, lam, 1.0, log=log)
    assert log[0].passed
    assert np.allclose(low.values, L(phi).values / 0.25)
    with pytest.raises(CertificateError) as info:
        build_lower_solution_general(L, phi, 1.2 * lam, 1.0)
    assert info.value.worst_node is not None and info.value.margin < 0


def test_upper_solution_recipe(grid, green):
    L = discretize_kernel(green, grid)
    f = F("sqrt(u)")
    e = principal_eigenpair(L)
    one = GridFunction.constant(grid, 1)
    L1 = sup_norm(L(one))
    _, R = find_r_R(f, e.lambda1, L1)
    up = build_upper_solution(L, f, H4Witness(R * one, L1))
    assert np.allclose(up.values, R * L(one).values)


def test_upper_solution_linear(grid):
    L = K("1", grid)
    one = GridFunction.constant(grid, 1)
    up = build_upper_solution(L, F("u/2"), H4Witness(one, 1.0))
    assert np.allclose(up.values, 1)
    with pytest.raises(DomainError):
        build_upper_solution(L, F("u/2"), H4Witness(0 * one, 1.0))
    with pytest.raises(CertificateError) as info:
        build_upper_solution(L, F("2*u"), H4Witness(one, 1.0))
    assert info.value.hypothesis == "h4"


def test_dual_bracket(grid):
    L = K("1", grid)
    f = F("min(2*u, 10)")
    e = principal_eigenpair(L)
    one = GridFunction.constant(grid, 1)
    lower, upper = build_bracket_dual(L, f, e, 20.0, H4Witness(one, 1.0))
    assert np.allclose(lower.values, 1, atol=1e-12)
    assert np.allclose(upper.values, 20, atol=1e-12)
    assert f.scalar(e.lambda1 * 20) <= 20
    with pytest.raises(CertificateError) as info:
        build_bracket_dual(L, f, e, 20.0, H4Witness(one, 2.0))
    assert info.value.hypothesis == "h4'"
    with pytest.raises(CertificateError) as info:
        build_bracket_dual(L, f, e, 4.0, H4Witness(one, 1.0))
    assert info.value.hypothesis == "h3'"


# ---- bracket properties -----------------------------------------------------

@pytest.mark.parametrize("fsrc", ["sqrt(u)", "sqrt(u) + 0.1", "u/(1+u) * 20", "log(1+u) * 15"])
def test_bracket_certificates_and_invariance(grid, green, fsrc):
    L = discretize_kernel(green, grid)
    f = F(fsrc)
    e = principal_eigenpair(L)
    one = GridFunction.constant(grid, 1)
    L1 = sup_norm(L(one))
    r, R = find_r_R(f, e.lambda1, L1)
    low = build_lower_solution(L, e, r)
    mu = R * one
    up = build_upper_solution(L, f, H4Witness(mu, L1))
    N = lambda u: L(f(u))  # noqa: E731
    assert leq(low, N(low), 1e-10)
    assert leq(N(up), up, 1e-10)
    # comparability via the sufficient condition on phi1 and mu
    assert h5_remark_holds(e, r, mu).passed
    assert leq(low, up)
    for _ in range(50):
        u = low + GridFunction(grid, rng.uniform(size=grid.n)) * (up - low)
        Nu = N(u)
        assert leq(low, Nu, 1e-10) and leq(Nu, up, 1e-10)


def test_phi_integral_lower_solution(grid, green):
    L = discretize_kernel(green, grid)
    e = principal_eigenpair(L)
    phi = Phi.integral(GridFunction.constant(grid, 1))
    low = build_lower_solution(L, e, 2 / np.pi, phi)
    # int_0^1 sin(pi t) dt = 2/pi, so this matches the max-norm lower solution with r = 1
    assert np.allclose(low.values, build_lower_solution(L, e, 1.0).values, atol=1e-5)
