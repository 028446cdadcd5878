import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from semispec.models.errors import MatrixError, NearSingularError, PreconditionError
from semispec.models.schemas import Route
from semispec.services import CauchyService, LinalgService, SemigroupService
from tests.matrices import DIAG12, J2, SCALAR

ROUTES = [Route.BLOCK_EXP, Route.QUADRATURE, Route.RESOLVENT]


def fresh_cauchy():
    linalg = LinalgService()
    return CauchyService(linalg, SemigroupService(linalg))


@pytest.mark.parametrize("route", ROUTES)
def test_scalar_B_and_F(cauchy, route):
    assert_allclose(cauchy.build_B(SCALAR, 0.0, 1.0, route), [[1.0 - np.exp(-1.0)]], rtol=1e-10)
    assert_allclose(cauchy.build_F(SCALAR, 0.0, 1.0, route), [[np.exp(-1.0)]], rtol=1e-10)


def test_jordan_B_by_block_exponential_and_quadrature(cauchy):
    expected = [[1.0, 0.5], [0.0, 1.0]]
    assert_allclose(cauchy.build_B(J2, 0.0, 1.0), expected, atol=1e-14)
    assert_allclose(cauchy.build_B(J2, 0.0, 1.0, Route.QUADRATURE), expected, atol=1e-12)


def test_resolvent_route_refuses_spectral_points(cauchy):
    with pytest.raises(NearSingularError, match="blockExp"):
        cauchy.build_B(J2, 0.0, 1.0, Route.RESOLVENT)


@pytest.mark.parametrize("route", ROUTES)
def test_F_of_diagonal_generator(cauchy, route):
    F = cauchy.build_F(DIAG12, 1.0, 1.0, route)
    expected = [0.5 + (np.exp(-2.0) - 1.0) / 4.0, 1.0 / 3.0 + (np.exp(-3.0) - 1.0) / 9.0]
    assert_allclose(np.diag(F), expected, rtol=1e-10)
    assert_allclose(np.diag(F), [0.28383, 0.22775], atol=1e-5)
    assert_allclose(F - np.diag(np.diag(F)), np.zeros((2, 2)), atol=1e-14)


@pytest.mark.parametrize("route", ROUTES)
def test_operators_vanish_at_time_zero(cauchy, route):
    A = np.array([[0.3, 1.0], [-2.0, 0.1]])
    assert not np.any(cauchy.build_B(A, 0.5, 0.0, route))
    assert not np.any(cauchy.build_F(A, 0.5, 0.0, route))


def test_negative_time_is_rejected(cauchy):
    with pytest.raises(MatrixError, match="nonnegative"):
        cauchy.build_B(SCALAR, 0.0, -1.0)


def test_cauchy_identities_scalar(cauchy):
    report = cauchy.verify_cauchy_identities(SCALAR, 0.0, 1.0, name="scalar")
    assert report.all_passed
    assert report.entries[0].residual <= 1e-12
    assert_allclose(report.extras["norm_F"], 0.36788, atol=1e-5)


def test_cauchy_identities_at_time_zero(cauchy):
    report = cauchy.verify_cauchy_identities(DIAG12, 1.0 + 1.0j, 0.0)
    assert report.all_passed
    assert all(e.residual <= 1e-14 for e in report.entries)


def test_F_bound_needs_lambda_left_of_omega(cauchy):
    # omega = abscissa + 1 = 0 for the scalar generator -1
    edge = cauchy.verify_cauchy_identities(SCALAR, 0.0, 1.0)
    assert edge.extras["bound_checked"] is False
    assert not any(e.identity.startswith("||F||") for e in edge.entries)

    inside = cauchy.verify_cauchy_identities(DIAG12, -5.0, 1.0)
    assert inside.extras["bound_checked"] is True
    assert inside.all_passed


def test_cauchy_identities_random_stable(cauchy, zoo):
    A = zoo.builtin("randomStable", {"n": 5, "seed": 11}).A
    report = cauchy.verify_cauchy_identities(A, 1.0 + 1.0j, 0.7)
    assert report.all_passed
    assert max(report.extras["routes"].values()) <= 1e-7


ZOO_TOKENS = ["diagonal", "jordan", "nilpotentShift", "rotation", "aliasPair", "truncatedLeftShift",
              "heat1d", "transport1d", "randomStable", "randomNonNormal"]


@pytest.mark.parametrize("name", ZOO_TOKENS)
@pytest.mark.parametrize("t", [0.0, 0.3, 1.0, 3.0])
def test_identity_suite_over_zoo(cauchy, zoo, name, t):
    A = zoo.builtin(name).A
    top = max(np.linalg.eigvals(A), key=lambda z: (z.real, z.imag))
    for lam in (0.0, 1.0 + 1.0j, complex(top)):
        identities = cauchy.verify_cauchy_identities(A, lam, t, name=name)
        powers = cauchy.verify_power_identities(A, lam, t, n_max=4, name=name)
        failed = [e.identity for e in identities.entries + powers.entries if not e.passed]
        assert not failed, f"{name} lambda={lam} t={t}: {failed}"


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**32 - 1), n=st.integers(min_value=1, max_value=8),
       t=st.floats(min_value=0.05, max_value=1.5))
def test_three_routes_agree(seed, n, t):
    cauchy = fresh_cauchy()
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n)) / np.sqrt(n)
    lam = complex(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0))
    deviations = cauchy.compare_routes(A, lam, t)
    assert {"B:quadrature", "F:quadrature"} <= set(deviations)
    for key in ("B:quadrature", "F:quadrature"):
        assert deviations[key] <= 1e-7, key
    distance = np.min(np.abs(np.linalg.eigvals(A) - lam))
    if distance > 0.1:
        assert deviations["B:resolventForm"] <= 1e-7
        assert deviations["F:resolventForm"] <= 1e-7


def test_power_identities_scalar(cauchy):
    report = cauchy.verify_power_identities(SCALAR, 0.0, 1.0, n_max=2)
    assert report.all_passed
    assert report.entries[2].residual <= 1e-14


def test_power_identities_at_time_zero(cauchy):
    assert cauchy.verify_power_identities(J2, 0.0, 0.0, n_max=1).all_passed


def test_power_identities_range_of_n(cauchy):
    with pytest.raises(MatrixError, match="1..6"):
        cauchy.verify_power_identities(SCALAR, 0.0, 1.0, n_max=7)


def test_factorization_residuals(cauchy):
    report = cauchy.factorization_residuals(J2, 0.5 + 0.5j, 2.0)
    assert report.all_passed
    assert len(report.entries) == 2


def test_lift_w_scalar(cauchy):
    b = 1.0 - np.exp(-1.0)
    w, report = cauchy.lift_w(SCALAR, 0.0, 1.0, [b], [1.0])
    assert_allclose(w, [1.0], rtol=1e-12)
    assert report.all_passed


def test_lift_w_zero_pair(cauchy):
    w, report = cauchy.lift_w(DIAG12, 0.0, 1.0, [0.0, 0.0], [0.0, 0.0])
    assert not np.any(w)


def test_lift_w_at_fractional_time(cauchy):
    b = 1.0 - np.exp(-0.5)
    w, report = cauchy.lift_w(SCALAR, 0.0, 0.5, [b], [1.0])
    assert_allclose(w, [1.0], rtol=1e-12)
    assert report.all_passed


@pytest.mark.parametrize("t", [0.0, -0.5])
def test_lifts_need_positive_time(cauchy, t):
    with pytest.raises(PreconditionError, match="t > 0"):
        cauchy.lift_w(SCALAR, 0.0, t, [0.0], [0.0])
    with pytest.raises(PreconditionError, match="t > 0"):
        cauchy.build_double_chain(SCALAR, 0.0, t, [np.ones(1)] * 3, [np.ones(1)] * 3, 2)


def test_double_chain_at_fractional_time(cauchy):
    t = 0.5
    b = 1.0 - np.exp(-t)
    depth = 4
    rows = [np.array([1.0])] * (depth + 1)
    cols = [np.array([b ** -j]) for j in range(depth + 1)]
    grid, report = cauchy.build_double_chain(SCALAR, 0.0, t, rows, cols, depth)
    assert report.all_passed
    expected = np.tile([b ** -j for j in range(depth + 1)], (depth + 1, 1))
    assert_allclose(grid[:, :, 0], expected, rtol=1e-10)


def test_lift_w_rejects_inconsistent_pair(cauchy):
    with pytest.raises(PreconditionError, match="defect") as excinfo:
        cauchy.lift_w(SCALAR, 0.0, 1.0, [5.0], [1.0])
    assert excinfo.value.defect > 1.0


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**32 - 1))
def test_lift_w_random_consistent_pairs(seed):
    cauchy = fresh_cauchy()
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((4, 4)) - 4.0 * np.eye(4)
    lam = 1.0 + 0.5j
    t = 0.8
    v = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    B = cauchy.build_B(A, lam, t)
    u = np.linalg.solve(lam * np.eye(4) - A, B @ v)
    w, report = cauchy.lift_w(A, lam, t, u, v)
    assert report.all_passed, [e.identity for e in report.entries if not e.passed]


def test_double_chain_scalar_matches_recursion(cauchy):
    b = 1.0 - np.exp(-1.0)
    depth = 4
    rows = [np.array([1.0])] * (depth + 1)
    cols = [np.array([b ** -j]) for j in range(depth + 1)]
    grid, report = cauchy.build_double_chain(SCALAR, 0.0, 1.0, rows, cols, depth)
    assert report.all_passed

    F, G = np.exp(-1.0), 1.0
    expected = np.zeros((depth + 1, depth + 1))
    expected[:, 0] = 1.0
    expected[0, :] = [b ** -j for j in range(depth + 1)]
    for i in range(1, depth + 1):
        for j in range(1, depth + 1):
            expected[i, j] = F * expected[i - 1, j] + G * expected[i, j - 1]
    assert_allclose(grid[:, :, 0], expected, rtol=1e-10)
    diagonal = [grid[i, i, 0] for i in range(depth + 1)]
    assert_allclose([b * y for y in diagonal[1:]], diagonal[:-1], rtol=1e-10)


def test_double_chain_of_zero_chains(cauchy):
    zeros = [np.zeros(2)] * 4
    grid, report = cauchy.build_double_chain(DIAG12, 0.0, 1.0, zeros, zeros, 3)
    assert not np.any(grid)
    assert report.all_passed


def test_double_chain_rejects_broken_chain(cauchy):
    rows = [np.array([1.0]), np.array([3.0]), np.array([1.0])]
    cols = [np.array([1.0])] * 3
    with pytest.raises(PreconditionError, match="chain broken"):
        cauchy.build_double_chain(SCALAR, 0.0, 1.0, rows, cols, 2)


def test_lift_svep_chain_needs_zero_start(cauchy):
    with pytest.raises(PreconditionError, match="x0 = 0"):
        cauchy.lift_svep_chain(DIAG12, 0.0, 1.0, [np.ones(2)])


def test_lift_svep_chain_on_aliased_kernel(cauchy):
    A = np.diag([0.0, 2j * np.pi])
    chain = [np.zeros(2), np.array([0.0, 1.0])]
    ys, report = cauchy.lift_svep_chain(A, 0.0, 1.0, chain)
    assert report.all_passed
    assert_allclose(ys[1], np.zeros(2), atol=1e-12)


def test_lift_resolvent_chain_recovers_the_resolvent(cauchy):
    t = 1.0
    x = np.array([1.0, 0.0])
    E = np.eye(2) - np.diag(np.exp([-1.0, -2.0]))
    chain = [np.linalg.solve(E, x)]
    chain.append(np.linalg.solve(E, chain[0]))
    ys, report = cauchy.lift_resolvent_chain(DIAG12, 0.0, t, x, chain)
    assert report.all_passed
    assert_allclose(ys[0], [1.0, 0.0], atol=1e-12)
    assert_allclose(ys[1], [1.0, 0.0], atol=1e-12)
