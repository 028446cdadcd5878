"""
Dense complex linear algebra kernel: clustered eigendecomposition with Riesz
projections, matrix exponential, minimal-norm solves and subspace arithmetic
"""
import logging
from typing import Optional

import numpy as np
import scipy.linalg
from scipy.cluster.hierarchy import fcluster, linkage

from ..config import settings
from ..models.errors import EigenDecompositionError, ExpmOverflowError, MatrixError
from ..models.schemas import (
    SpectralCluster, SpectralDecomposition, Subspace, as_matrix, as_vector,
)

logger = logging.getLogger(__name__)


def opnorm(A) -> float:
    """Spectral norm of a matrix, Euclidean norm of a vector"""
    A = np.asarray(A)
    if A.size == 0:
        return 0.0
    if A.ndim == 1:
        return float(np.linalg.norm(A))
    return float(np.linalg.norm(A, 2))


class LinalgService:
    def __init__(self, cluster_tol_rel: float = settings.CLUSTER_TOL_REL,
                 rank_tol: float = settings.RANK_TOL,
                 contain_tol: float = settings.CONTAIN_TOL,
                 max_retries: int = settings.MAX_RETRIES):
        self.cluster_tol_rel = cluster_tol_rel
        self.rank_tol = rank_tol
        self.contain_tol = contain_tol
        self.max_retries = max_retries

    def eigenvalues(self, A, name: str = "A") -> np.ndarray:
        A = as_matrix(A, name)
        try:
            return scipy.linalg.eigvals(A)
        except np.linalg.LinAlgError as e:
            raise EigenDecompositionError(f"eigenvalue iteration did not converge for {name}: {str(e)}")

    def spectral_abscissa(self, A) -> float:
        return float(np.max(self.eigenvalues(A).real))

    def spectral_radius(self, A) -> float:
        return float(np.max(np.abs(self.eigenvalues(A))))

    def default_cluster_tol(self, A, scale: Optional[float] = None) -> float:
        return self.cluster_tol_rel * (opnorm(A) if scale is None else scale)

    def _cluster_labels(self, w: np.ndarray, tol: float) -> np.ndarray:
        """Single-linkage clusters of eigenvalues in the complex plane"""
        if len(w) == 1:
            return np.array([1])
        points = np.column_stack([w.real, w.imag])
        Z = linkage(points, method="single")
        return fcluster(Z, t=tol, criterion="distance")

    def eig_decompose(self, A, cluster_tol: Optional[float] = None,
                      name: str = "A") -> SpectralDecomposition:
        """Clustered spectrum with Riesz projections from reordered Schur forms"""
        A = as_matrix(A, name)
        n = A.shape[0]
        w = self.eigenvalues(A, name)
        tol = self.default_cluster_tol(A) if cluster_tol is None else cluster_tol
        labels = self._cluster_labels(w, tol)

        groups = []
        for label in np.unique(labels):
            members = w[labels == label]
            groups.append((complex(np.mean(members)), len(members)))
        # Deterministic order: largest real part first, then imaginary part
        groups.sort(key=lambda g: (-round(g[0].real, 12), round(g[0].imag, 12)))
        centers = np.array([c for c, _ in groups])

        if len(groups) == 1:
            cluster = SpectralCluster(eigenvalue=groups[0][0], multiplicity=n,
                                      projection=np.eye(n, dtype=complex))
            return SpectralDecomposition(clusters=[cluster], cluster_tol=tol)

        clusters = []
        for k, (center, mult) in enumerate(groups):
            P = self._riesz_projection(A, centers, k, mult, name)
            clusters.append(SpectralCluster(eigenvalue=center, multiplicity=mult, projection=P))

        logger.debug(f"eig_decompose({name}): {len(clusters)} clusters, tol={tol:.3e}")
        return SpectralDecomposition(clusters=clusters, cluster_tol=tol)

    def _sorted_schur(self, M: np.ndarray, select) -> tuple:
        T, Z, sdim = scipy.linalg.schur(M, output="complex", sort=select)
        return T, Z, sdim

    def _riesz_projection(self, A: np.ndarray, centers: np.ndarray, k: int, mult: int,
                          name: str, retry_count: int = 0) -> np.ndarray:
        """Projection onto the generalized eigenspace of cluster k along the others"""
        def select(z):
            return int(np.argmin(np.abs(centers - z))) == k

        try:
            if retry_count == 0:
                T, Z, sdim = self._sorted_schur(A, select)
            else:
                # Reorder an already triangular factor
                T0, Z0 = scipy.linalg.schur(A, output="complex")
                T, Z1, sdim = self._sorted_schur(T0, select)
                Z = Z0 @ Z1
            if sdim != mult:
                raise np.linalg.LinAlgError(f"reordering selected {sdim} eigenvalues, expected {mult}")
        except (np.linalg.LinAlgError, ValueError) as e:
            if retry_count < self.max_retries:
                logger.warning(f"Schur reorder of {name} for cluster {centers[k]:.6g} failed "
                               f"({str(e)}); retrying")
                return self._riesz_projection(A, centers, k, mult, name, retry_count + 1)
            raise EigenDecompositionError(
                f"Schur reordering failed for {name} at eigenvalue {centers[k]:.6g} "
                f"after {self.max_retries + 1} attempts: {str(e)}")

        n = A.shape[0]
        m = mult
        Pt = np.zeros((n, n), dtype=complex)
        Pt[:m, :m] = np.eye(m)
        if m < n:
            # T11 R - R T22 = -T12 block-diagonalizes the Schur factor
            R = scipy.linalg.solve_sylvester(T[:m, :m], -T[m:, m:], -T[:m, m:])
            Pt[:m, m:] = -R
        return Z @ Pt @ Z.conj().T

    def decomposition_defects(self, A, decomp: SpectralDecomposition) -> dict:
        """Norm defects of the projection identities, for diagnostics and tests"""
        A = as_matrix(A)
        n = A.shape[0]
        Ps = [c.projection for c in decomp.clusters]
        total = sum(Ps)
        idempotency = max(opnorm(P @ P - P) / max(opnorm(P), 1.0) for P in Ps)
        cross = 0.0
        for i, Pi in enumerate(Ps):
            for j, Pj in enumerate(Ps):
                if i != j:
                    cross = max(cross, opnorm(Pi @ Pj))
        nilpotency = 0.0
        scale = max(opnorm(A), 1.0)
        for c in decomp.clusters:
            N = np.linalg.matrix_power(A - c.eigenvalue * np.eye(n), c.multiplicity) @ c.projection
            nilpotency = max(nilpotency, opnorm(N) / scale ** c.multiplicity)
        return {
            "sum_to_identity": opnorm(total - np.eye(n)),
            "idempotency": idempotency,
            "cross_products": cross,
            "nilpotency": nilpotency,
        }

    def expm(self, A) -> np.ndarray:
        """Scaling-and-squaring Pade exponential"""
        A = as_matrix(A)
        with np.errstate(over="ignore", invalid="ignore"):
            E = scipy.linalg.expm(A)
        if not np.all(np.isfinite(E)):
            raise ExpmOverflowError(
                f"matrix exponential overflowed for ||A|| = {opnorm(A):.3e}, "
                f"max Re = {np.max(np.real(np.diag(A))):.3e}; rescale the generator or shorten t")
        return E

    def min_norm_solve(self, A, b, rank_tol: Optional[float] = None) -> Optional[np.ndarray]:
        """
        Minimal-norm solution of Ax = b by singular-value truncation

        Returns None when b has a component beyond tolerance outside the numerical range.
        A may be rectangular (m x r) here; b has length m.
        """
        A = np.asarray(A, dtype=complex)
        if A.ndim != 2:
            raise MatrixError(f"min_norm_solve expects a matrix, got shape {A.shape}")
        b = as_vector(b, A.shape[0], "b")
        tol = self.rank_tol if rank_tol is None else rank_tol
        nb = np.linalg.norm(b)
        if nb == 0.0:
            return np.zeros(A.shape[1], dtype=complex)
        if A.size == 0 or not np.any(A):
            return None

        U, s, Vh = scipy.linalg.svd(A, full_matrices=False)
        rank = int(np.sum(s > tol * s[0]))
        Ur = U[:, :rank]
        coeffs = Ur.conj().T @ b
        outside = np.linalg.norm(b - Ur @ coeffs)
        if outside > tol * nb:
            logger.debug(f"min_norm_solve: inconsistent, outside-range component {outside:.3e}")
            return None
        return Vh[:rank].conj().T @ (coeffs / s[:rank])

    def zero_subspace(self, n: int, tol: Optional[float] = None) -> Subspace:
        return Subspace(ambient_dim=n, basis=np.zeros((n, 0), dtype=complex),
                        rank_tol=self.rank_tol if tol is None else tol)

    def full_space(self, n: int, tol: Optional[float] = None) -> Subspace:
        return Subspace(ambient_dim=n, basis=np.eye(n, dtype=complex),
                        rank_tol=self.rank_tol if tol is None else tol)

    def span(self, M, tol: Optional[float] = None, scale: Optional[float] = None) -> Subspace:
        """Orthonormal basis of the column space, singular values cut at tol * scale"""
        M = np.asarray(M, dtype=complex)
        if M.ndim == 1:
            M = M.reshape(-1, 1)
        n = M.shape[0]
        tol = self.rank_tol if tol is None else tol
        if M.shape[1] == 0:
            return self.zero_subspace(n, tol)
        U, s, _ = scipy.linalg.svd(M, full_matrices=False)
        ref = (s[0] if s.size else 0.0) if scale is None else scale
        rank = int(np.sum(s > tol * ref)) if ref > 0 else 0
        return Subspace(ambient_dim=n, basis=U[:, :rank], rank_tol=tol)

    def kernel(self, A, tol: Optional[float] = None, scale: Optional[float] = None) -> Subspace:
        """Null space by SVD, singular values cut at tol * scale (default ||A||)"""
        A = as_matrix(A)
        n = A.shape[0]
        tol = self.rank_tol if tol is None else tol
        _, s, Vh = scipy.linalg.svd(A)
        ref = (s[0] if s.size else 0.0) if scale is None else scale
        rank = int(np.sum(s > tol * ref)) if ref > 0 else 0
        return Subspace(ambient_dim=n, basis=Vh[rank:].conj().T, rank_tol=tol)

    def range_of_power(self, A, n_power: int, tol: Optional[float] = None,
                       scale: Optional[float] = None) -> Subspace:
        """
        Orthonormal basis of col(A^n), built as A applied to the previous range and
        re-orthonormalized; stops once the dimension stabilizes.
        """
        A = as_matrix(A)
        n = A.shape[0]
        tol = self.rank_tol if tol is None else tol
        ref = opnorm(A) if scale is None else scale
        U = self.full_space(n, tol)
        for _ in range(n_power):
            if U.is_zero:
                break
            nxt = self.span(A @ U.basis, tol=tol, scale=ref)
            stable = nxt.dim == U.dim
            U = nxt
            if stable:
                # R(A^k) = R(A^{k+1}) implies the range is stationary from here on
                break
        return U

    def hyper_range(self, A, scale: Optional[float] = None) -> Subspace:
        """R^inf(A): the stabilized range of powers, at the clustering tolerance"""
        A = as_matrix(A)
        return self.range_of_power(A, A.shape[0], tol=self.cluster_tol_rel, scale=scale)

    def _check_ambient(self, U: Subspace, V: Subspace):
        if U.ambient_dim != V.ambient_dim:
            raise MatrixError(f"ambient dimension mismatch: {U.ambient_dim} vs {V.ambient_dim}")

    def containment_residual(self, U: Subspace, V: Subspace) -> float:
        """Largest distance from a basis vector of V to U"""
        self._check_ambient(U, V)
        if V.is_zero:
            return 0.0
        if U.is_zero:
            return 1.0
        residual = V.basis - U.basis @ (U.basis.conj().T @ V.basis)
        return float(np.max(np.linalg.norm(residual, axis=0)))

    def contains(self, U: Subspace, V: Subspace, tol: Optional[float] = None) -> bool:
        """True iff every basis vector of V lies in U up to tol"""
        tol = self.contain_tol if tol is None else tol
        return self.containment_residual(U, V) <= tol

    def equal(self, U: Subspace, V: Subspace, tol: Optional[float] = None) -> bool:
        return self.contains(U, V, tol) and self.contains(V, U, tol)

    def complement(self, U: Subspace) -> np.ndarray:
        """Orthonormal basis of the orthogonal complement"""
        n = U.ambient_dim
        if U.is_zero:
            return np.eye(n, dtype=complex)
        if U.dim >= n:
            return np.zeros((n, 0), dtype=complex)
        Q, _ = scipy.linalg.qr(U.basis)
        return Q[:, U.dim:]

    def intersect(self, U: Subspace, V: Subspace, tol: Optional[float] = None) -> Subspace:
        """U ∩ V as the common null space of the stacked orthogonal complements"""
        self._check_ambient(U, V)
        n = U.ambient_dim
        tol = self.contain_tol if tol is None else tol
        rank_tol = max(U.rank_tol, V.rank_tol)
        if U.is_zero or V.is_zero:
            return self.zero_subspace(n, rank_tol)
        stacked = np.vstack([self.complement(U).conj().T, self.complement(V).conj().T])
        if stacked.shape[0] == 0:
            return self.full_space(n, rank_tol)
        _, s, Vh = scipy.linalg.svd(stacked)
        rank = int(np.sum(s > tol))
        return Subspace(ambient_dim=n, basis=Vh[rank:].conj().T, rank_tol=rank_tol)
