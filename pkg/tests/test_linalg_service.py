import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from semispec.models.errors import EigenDecompositionError, ExpmOverflowError, MatrixError
from semispec.models.schemas import as_matrix
from semispec.services import LinalgService
from tests.matrices import DIAG12, J2, random_complex


def test_diagonal_clusters_and_projections(linalg):
    decomp = linalg.eig_decompose(DIAG12, cluster_tol=1e-8)
    assert [c.multiplicity for c in decomp.clusters] == [1, 1]
    assert_allclose(decomp.eigenvalues, [-1.0, -2.0], atol=1e-14)
    assert_allclose(decomp.clusters[0].projection, np.diag([1.0, 0.0]), atol=1e-12)
    assert_allclose(decomp.clusters[1].projection, np.diag([0.0, 1.0]), atol=1e-12)


def test_jordan_block_is_one_cluster(linalg):
    decomp = linalg.eig_decompose(J2)
    assert len(decomp.clusters) == 1
    cluster = decomp.clusters[0]
    assert cluster.multiplicity == 2
    assert abs(cluster.eigenvalue) == 0.0
    assert_allclose(cluster.projection, np.eye(2))


def test_failed_schur_reorder_is_retried_on_the_triangular_factor(linalg, monkeypatch):
    A = np.array([[-1.0, 1.0], [0.5, -2.0]])
    sort_schur = linalg._sorted_schur
    calls = []

    def flaky(M, select):
        calls.append(np.allclose(M, np.triu(M)))
        if not calls[-1]:
            raise np.linalg.LinAlgError("reorder failed")
        return sort_schur(M, select)

    monkeypatch.setattr(linalg, "_sorted_schur", flaky)
    decomp = linalg.eig_decompose(A)
    assert calls == [False, True, False, True]
    defects = linalg.decomposition_defects(A, decomp)
    assert defects["sum_to_identity"] <= 1e-12
    assert defects["cross_products"] <= 1e-12


def test_schur_reorder_gives_up_after_max_retries(linalg, monkeypatch):
    def broken(M, select):
        raise np.linalg.LinAlgError("reorder failed")

    monkeypatch.setattr(linalg, "_sorted_schur", broken)
    with pytest.raises(EigenDecompositionError, match="after 3 attempts"):
        linalg.eig_decompose(DIAG12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**32 - 1), n=st.integers(min_value=1, max_value=6))
def test_expm_of_commuting_sum_factors(seed, n):
    linalg = LinalgService()
    A = random_complex(n, seed) / (2.0 * np.sqrt(n))
    B = 0.5 * A @ A - 0.3 * A + 0.2j * np.eye(n)
    lhs = linalg.expm(A + B)
    assert np.linalg.norm(lhs - linalg.expm(A) @ linalg.expm(B), 2) <= 1e-10 * np.linalg.norm(lhs, 2)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**32 - 1), n=st.integers(min_value=2, max_value=6))
def test_projections_resolve_identity(seed, n):
    linalg = LinalgService()
    A = random_complex(n, seed)
    decomp = linalg.eig_decompose(A)
    defects = linalg.decomposition_defects(A, decomp)
    assert decomp.dim == n
    assert defects["sum_to_identity"] <= 1e-8
    assert defects["idempotency"] <= 1e-8
    assert defects["cross_products"] <= 1e-8


def test_expm_matches_closed_forms(linalg):
    assert_allclose(linalg.expm(DIAG12), np.diag(np.exp([-1.0, -2.0])), rtol=1e-14)
    assert_allclose(linalg.expm(2.0 * J2), [[1.0, 2.0], [0.0, 1.0]], atol=1e-14)


def test_expm_overflow_advises_rescaling(linalg):
    with pytest.raises(ExpmOverflowError, match="rescale"):
        linalg.expm(np.array([[1000.0]]))


def test_min_norm_solve_consistent_and_inconsistent(linalg):
    A = np.diag([1.0, 0.0])
    assert_allclose(linalg.min_norm_solve(A, [2.0, 0.0]), [2.0, 0.0], atol=1e-14)
    assert linalg.min_norm_solve(A, [0.0, 1.0]) is None
    assert_allclose(linalg.min_norm_solve(A, [0.0, 0.0]), [0.0, 0.0])


def test_min_norm_solve_rank_deficient_stays_off_the_kernel(linalg):
    rng = np.random.default_rng(7)
    A = rng.standard_normal((5, 3)) @ rng.standard_normal((3, 5))
    b = A @ rng.standard_normal(5)
    x = linalg.min_norm_solve(A, b)
    assert np.linalg.norm(A @ x - b) <= 1e-9 * np.linalg.norm(b)
    assert_allclose(x, np.linalg.pinv(A) @ b, atol=1e-9)


def test_kernel_and_hyper_range_of_jordan_block(linalg):
    K = linalg.kernel(J2)
    assert K.dim == 1
    assert_allclose(abs(K.basis[0, 0]), 1.0)
    assert linalg.hyper_range(J2).is_zero
    assert linalg.range_of_power(J2, 1).dim == 1


def test_hyper_range_drops_the_nilpotent_part(linalg):
    A = np.diag([0.0, 1.0])
    R = linalg.hyper_range(A)
    assert R.dim == 1
    assert linalg.contains(R, linalg.span(np.array([0.0, 1.0])))


def test_intersection(linalg):
    I3 = np.eye(3)
    U = linalg.span(I3[:, :2])
    V = linalg.span(I3[:, 1:])
    inter = linalg.intersect(U, V)
    assert inter.dim == 1
    assert_allclose(abs(inter.basis[:, 0]), [0.0, 1.0, 0.0], atol=1e-12)


def test_containment_with_zero_subspaces(linalg):
    zero = linalg.zero_subspace(2)
    line = linalg.span(np.array([1.0, 0.0]))
    assert linalg.containment_residual(line, zero) == 0.0
    assert linalg.containment_residual(zero, line) == 1.0
    assert not linalg.contains(zero, line)


def test_ambient_mismatch_is_rejected(linalg):
    with pytest.raises(MatrixError, match="ambient dimension"):
        linalg.contains(linalg.full_space(2), linalg.full_space(3))


@pytest.mark.parametrize("bad", [np.ones((2, 3)), np.array([[np.nan]]), np.zeros((0, 0))])
def test_as_matrix_rejects_bad_input(bad):
    with pytest.raises(MatrixError):
        as_matrix(bad)
