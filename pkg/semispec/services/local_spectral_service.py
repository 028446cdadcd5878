"""
Local spectral theory for matrix generators: local spectra, local resolvent
chains, SVEP scans, local spectral subspaces, analytic/algebraic cores and the
inclusions that transport them from A to T(t)
"""
import logging
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from ..config import settings
from ..models.errors import ConfigError
from ..models.schemas import (
    ChainReport, ChainVerdict, CoreReport, Instance, LocalSpectrumReport, SpectralDecomposition,
    Subspace, SvepScanReport, TheoremReport, as_matrix, as_vector,
)
from ..utils.format_utils import complex_pair, complex_pairs, format_points
from ..utils.sweep_utils import ordered_map
from .cauchy_service import CauchyService
from .linalg_service import LinalgService, opnorm

logger = logging.getLogger(__name__)

DIVERGENCE_LIMIT = 1e8
MATCH_REL = 1e-6
SHADOW_RANK_TOL = 1e-14
# chains stop once a step norm passes this; the verdict then comes from the steps taken
OVERFLOW_LIMIT = 1e150


def match_points(points: Sequence[complex], targets: Sequence[complex], tol: float) -> List[complex]:
    """Points with no target within tol"""
    targets = np.asarray(list(targets), dtype=complex)
    missing = []
    for z in points:
        if targets.size == 0 or np.min(np.abs(targets - z)) > tol:
            missing.append(complex(z))
    return missing


def tail_growth(norms: Sequence[float]) -> float:
    """exp of the least-squares slope of log ||x_i|| over the last half of the chain"""
    norms = np.asarray(norms, dtype=float)
    if norms.size == 0 or not np.any(norms > 0):
        return 0.0
    if not np.all(np.isfinite(norms)):
        return float("inf")
    start = norms.size // 2
    idx = np.arange(norms.size)[start:]
    tail = norms[start:]
    keep = tail > 0
    if np.sum(keep) < 2:
        return 0.0
    slope = np.polyfit(idx[keep], np.log(tail[keep]), 1)[0]
    return float(np.exp(slope))


class LocalSpectralService:
    def __init__(self, linalg: LinalgService, cauchy: CauchyService,
                 membership_tol: float = settings.MEMBERSHIP_TOL,
                 chain_depth: int = settings.CHAIN_DEPTH):
        self.linalg = linalg
        self.cauchy = cauchy
        self.membership_tol = membership_tol
        self.chain_depth = chain_depth

    def local_spectrum(self, A, x, membership_tol: Optional[float] = None,
                       decomp: Optional[SpectralDecomposition] = None) -> LocalSpectrumReport:
        """Eigenvalues whose spectral projection does not annihilate x"""
        A = as_matrix(A)
        x = as_vector(x, A.shape[0])
        tol = self.membership_tol if membership_tol is None else membership_tol
        nx = float(np.linalg.norm(x))
        if nx == 0.0:
            return LocalSpectrumReport(x=x, points=[], weights=[], membership_tol=tol)
        decomp = decomp or self.linalg.eig_decompose(A)

        points, weights = [], []
        for cluster in decomp.clusters:
            weight = float(np.linalg.norm(cluster.projection @ x)) / nx
            if weight > tol:
                points.append(cluster.eigenvalue)
                weights.append(weight)
        return LocalSpectrumReport(x=x, points=points, weights=weights, membership_tol=tol)

    def _restricted_solver(self, M: np.ndarray, scale: float):
        """Minimal-norm solves of M y = b with y confined to the hyper-range of M"""
        R = self.linalg.hyper_range(M, scale=scale)

        def solve(b):
            if np.linalg.norm(b) == 0.0:
                return np.zeros(M.shape[0], dtype=complex)
            if R.is_zero:
                return None
            c = self.linalg.min_norm_solve(M @ R.basis, b)
            return None if c is None else R.basis @ c

        return solve

    def _local_projection(self, A: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Sum of the Riesz projections of the clusters in sigma_A(x); I for x = 0"""
        n = A.shape[0]
        decomp = self.linalg.eig_decompose(A)
        points = self.local_spectrum(A, x, decomp=decomp).points
        if not points:
            return np.eye(n, dtype=complex)
        members = set(points)
        P = np.zeros((n, n), dtype=complex)
        for cluster in decomp.clusters:
            if cluster.eigenvalue in members:
                P += cluster.projection
        return P

    def _run_chain(self, solve, start: np.ndarray, depth: int) -> Tuple[List[np.ndarray], Optional[int]]:
        chain = []
        current = start
        for i in range(depth):
            nxt = solve(current)
            if nxt is None:
                return chain, i
            chain.append(nxt)
            if not np.linalg.norm(nxt) <= OVERFLOW_LIMIT:
                logger.debug(f"chain stopped at step {i}: norm past {OVERFLOW_LIMIT:.0e}")
                break
            current = nxt
        return chain, None

    def resolvent_chain(self, A, mu: complex, x, depth: Optional[int] = None) -> ChainReport:
        """
        (A - mu) x_0 = x, (A - mu) x_{i+1} = x_i by minimal-norm solves inside the
        hyper-range of A - mu, each projected onto X_A(sigma_A(x)); growth estimated
        from the tail of log ||x_i||
        """
        A = as_matrix(A)
        n = A.shape[0]
        x = as_vector(x, n)
        depth = self.chain_depth if depth is None else depth
        if depth < 8:
            raise ConfigError(f"depth must be at least 8, got {depth}")
        M = A - mu * np.eye(n)
        restricted = self._restricted_solver(M, CauchyService.shift_scale(A, mu))
        P = self._local_projection(A, x)

        def solve(b):
            # keep every step inside X_A(sigma_A(x)); P commutes with A
            y = restricted(b)
            return None if y is None else P @ y

        chain, failing = self._run_chain(solve, x, depth)
        norms = [float(np.linalg.norm(v)) for v in chain]

        if failing is not None:
            logger.debug(f"resolvent chain at mu={mu:.6g} inconsistent at step {failing}")
            return ChainReport(mu=complex(mu), x=x, chain=chain, step_norms=norms, growth_estimate=float("inf"),
                               verdict=ChainVerdict.INCONSISTENT, failing_index=failing)

        growth = tail_growth(norms)
        verdict = ChainVerdict.CONVERGENT
        if not np.isfinite(growth) or growth > DIVERGENCE_LIMIT:
            verdict = ChainVerdict.DIVERGENT
        return ChainReport(mu=complex(mu), x=x, chain=chain, step_norms=norms, growth_estimate=growth,
                           verdict=verdict)

    def analytic_core_chain(self, A, x, depth: Optional[int] = None) -> ChainReport:
        """
        Backward orbit x_0 = x, A x_n = x_{n-1} inside the hyper-range of A;
        growth_estimate is delta = max (||x_n|| / ||x||)^{1/n}
        """
        A = as_matrix(A)
        x = as_vector(x, A.shape[0])
        depth = self.chain_depth if depth is None else depth
        solve = self._restricted_solver(A, opnorm(A))
        chain, failing = self._run_chain(solve, x, depth)
        norms = [float(np.linalg.norm(v)) for v in chain]
        nx = float(np.linalg.norm(x))

        if failing is not None:
            return ChainReport(mu=0j, x=x, chain=chain, step_norms=norms, growth_estimate=float("inf"),
                               verdict=ChainVerdict.INCONSISTENT, failing_index=failing)
        delta = 0.0
        if nx > 0:
            delta = max((nrm / nx) ** (1.0 / k) for k, nrm in enumerate(norms, start=1))
        verdict = ChainVerdict.CONVERGENT if delta <= DIVERGENCE_LIMIT else ChainVerdict.DIVERGENT
        return ChainReport(mu=0j, x=x, chain=chain, step_norms=norms, growth_estimate=float(delta),
                           verdict=verdict)

    def svep_shadow_growth(self, A, mu: complex, depth: Optional[int] = None) -> float:
        """
        Chain from the smallest right singular vector of A - mu continued by
        minimal-norm solves; max ||x_i||^{1/(i-1)} over the steps that exist
        """
        A = as_matrix(A)
        n = A.shape[0]
        depth = self.chain_depth if depth is None else depth
        M = A - mu * np.eye(n)
        _, _, Vh = scipy.linalg.svd(M)
        current = Vh[-1].conj()
        growth = 0.0
        # steps are renormalized; log ||x_i|| is accumulated instead of x_i itself
        log_norm = 0.0
        for i in range(2, depth + 1):
            nxt = self.linalg.min_norm_solve(M, current, rank_tol=SHADOW_RANK_TOL)
            if nxt is None:
                break
            step = float(np.linalg.norm(nxt))
            if step == 0.0 or not np.isfinite(step):
                break
            log_norm += np.log(step)
            growth = max(growth, float(np.exp(min(log_norm / (i - 1), np.log(OVERFLOW_LIMIT)))))
            current = nxt / step
        return growth

    def _svep_point(self, A: np.ndarray, mu: complex, depth: int) -> Tuple[bool, int, float]:
        n = A.shape[0]
        M = A - mu * np.eye(n)
        scale = CauchyService.shift_scale(A, mu)
        K = self.linalg.kernel(M, tol=self.linalg.cluster_tol_rel, scale=scale)
        R = self.linalg.hyper_range(M, scale=scale)
        inter = self.linalg.intersect(K, R)
        member = False
        if not inter.is_zero:
            # x_1 must also continue: (A - mu) x_{i+1} = x_i with bounded growth
            chain, failing = self._run_chain(self._restricted_solver(M, scale), inter.basis[:, 0], depth)
            norms = [1.0] + [float(np.linalg.norm(v)) for v in chain]
            member = failing is None and tail_growth(norms) <= DIVERGENCE_LIMIT
        return member, inter.dim, self.svep_shadow_growth(A, mu, depth)

    def svep_scan(self, A, grid: Sequence[complex], depth: Optional[int] = None) -> SvepScanReport:
        """Grid estimate of S(A): nonzero x_1 in ker(A - mu) ∩ R^inf(A - mu) with a bounded continuation"""
        A = as_matrix(A)
        depth = self.chain_depth if depth is None else depth
        grid = [complex(mu) for mu in grid]
        results = ordered_map(lambda mu: self._svep_point(A, mu, depth), grid, label="svep_scan")
        members = [mu for mu, (member, _, _) in zip(grid, results) if member]
        if members:
            logger.error(f"svep_scan found SVEP failures at {format_points(members)}")
        return SvepScanReport(grid=grid, members=members,
                              intersection_dims=[dim for _, dim, _ in results],
                              shadow_growth=[growth for _, _, growth in results])

    @staticmethod
    def _projection_range(P: np.ndarray, rank: int) -> np.ndarray:
        U, _, _ = scipy.linalg.svd(P)
        return U[:, :rank]

    def _spectral_span(self, decomp: SpectralDecomposition, keep: Callable[[complex], bool], n: int) -> Subspace:
        chosen = [c for c in decomp.clusters if keep(c.eigenvalue)]
        if not chosen:
            return self.linalg.zero_subspace(n)
        total = sum(c.multiplicity for c in chosen)
        if total == n:
            return self.linalg.full_space(n)
        blocks = np.hstack([self._projection_range(c.projection, c.multiplicity) for c in chosen])
        U, _, _ = scipy.linalg.svd(blocks, full_matrices=False)
        return Subspace(ambient_dim=n, basis=U[:, :total], rank_tol=self.linalg.rank_tol)

    def local_subspace(self, A, omega: Callable[[complex], bool],
                       decomp: Optional[SpectralDecomposition] = None) -> Subspace:
        """X_A(Omega): the generalized eigenspaces of the eigenvalues inside Omega"""
        A = as_matrix(A)
        decomp = decomp or self.linalg.eig_decompose(A)
        return self._spectral_span(decomp, omega, A.shape[0])

    def empty_set_subspace(self, A) -> Subspace:
        """X_A(∅) = {0}"""
        return self.local_subspace(A, lambda z: False)

    def cores(self, A, scale: Optional[float] = None) -> CoreReport:
        """
        K(A) = X_A(C \\ {0}), C(A) = R^inf(A); an eigenvalue counts as zero when
        |lambda| <= cluster_tol_rel * scale
        """
        A = as_matrix(A)
        n = A.shape[0]
        scale = opnorm(A) if scale is None else scale
        zero_tol = self.linalg.cluster_tol_rel * scale
        hyper = self.linalg.hyper_range(A, scale=scale)
        if scale == 0.0:
            K = self.linalg.zero_subspace(n)
        else:
            decomp = self.linalg.eig_decompose(A, cluster_tol=zero_tol)
            K = self._spectral_span(decomp, lambda z: abs(z) > zero_tol, n)
        report = CoreReport(K=K, C=hyper, hyper_range=hyper)
        if not self.linalg.contains(report.C, report.K):
            logger.warning(f"core chain K ⊆ C violated: dim K = {K.dim}, dim C = {hyper.dim}")
        return report

    def core_spectra(self, A) -> Tuple[List[complex], List[complex]]:
        """(sigma_ac, sigma_alc): {lambda_0} when sigma(A) = {lambda_0}, else empty"""
        decomp = self.linalg.eig_decompose(A)
        if len(decomp.clusters) == 1:
            only = decomp.clusters[0].eigenvalue
            return [only], [only]
        return [], []

    def surjectivity_and_semiregular_spectra(self, A) -> Tuple[List[complex], List[complex]]:
        """
        sigma_su(A) = sigma(A); sigma_K(A) = eigenvalues where ker(lambda - A) is not
        inside R^inf(lambda - A). The basis sweep of local spectra must recover sigma_su.
        """
        A = as_matrix(A)
        n = A.shape[0]
        decomp = self.linalg.eig_decompose(A)
        sigma_su = decomp.eigenvalues
        sigma_K = []
        for lam in sigma_su:
            L = lam * np.eye(n) - A
            scale = CauchyService.shift_scale(A, lam)
            K = self.linalg.kernel(L, tol=self.linalg.cluster_tol_rel, scale=scale)
            R = self.linalg.hyper_range(L, scale=scale)
            if not self.linalg.contains(R, K):
                sigma_K.append(lam)

        swept = self.basis_sweep_spectrum(A, decomp)
        tol = MATCH_REL * (1.0 + opnorm(A))
        if match_points(swept, sigma_su, tol) or match_points(sigma_su, swept, tol):
            logger.error(f"basis sweep {format_points(swept)} differs from sigma_su {format_points(sigma_su)}")
        return sigma_su, sigma_K

    def basis_sweep_spectrum(self, A, decomp: Optional[SpectralDecomposition] = None) -> List[complex]:
        """Union of local spectra over the standard basis"""
        A = as_matrix(A)
        n = A.shape[0]
        decomp = decomp or self.linalg.eig_decompose(A)
        seen = []
        for k in range(n):
            e = np.zeros(n, dtype=complex)
            e[k] = 1.0
            for z in self.local_spectrum(A, e, decomp=decomp).points:
                if not any(z == w for w in seen):
                    seen.append(z)
        return seen

    def _match_tol(self, A: np.ndarray, t: float, decomp_T: Optional[SpectralDecomposition] = None) -> float:
        """Match radius, widened to the diameter a merged cluster of T(t) can reach"""
        tol = MATCH_REL * (1.0 + np.exp(t * self.linalg.spectral_abscissa(A)))
        if decomp_T is not None:
            tol = max(tol, decomp_T.cluster_tol * max(decomp_T.dim - 1, 1))
        return float(tol)

    def verify_local_spectrum_inclusion(self, A, t: float, x_samples: Sequence, name: str = "A") -> TheoremReport:
        """e^{t sigma_A(x)} ⊆ sigma_{T(t)}(x) for every sample x"""
        A = as_matrix(A)
        n = A.shape[0]
        T = self.cauchy.semigroup_at(A, t)
        decomp_A = self.linalg.eig_decompose(A)
        decomp_T = self.linalg.eig_decompose(T, name="T(t)")
        tol = self._match_tol(A, t, decomp_T)

        def check(indexed):
            k, x = indexed
            lhs_points = self.local_spectrum(A, x, decomp=decomp_A).points
            mapped = [complex(np.exp(t * z)) for z in lhs_points]
            rhs_points = self.local_spectrum(T, x, decomp=decomp_T).points
            missing = match_points(mapped, rhs_points, tol)
            witnesses = []
            for target in rhs_points:
                sources = [z for z, w in zip(lhs_points, mapped) if abs(w - target) <= tol]
                if len(sources) > 1:
                    witnesses.append(f"x#{k}: {format_points(sources)} map to {format_points([target])}")
            return mapped, rhs_points, missing, witnesses

        samples = [as_vector(x, n) for x in x_samples]
        results = ordered_map(check, list(enumerate(samples)), label="local_inclusion")
        included = all(not missing for _, _, missing, _ in results)
        witnesses = [w for *_, ws in results for w in ws]
        for k, (_, _, missing, _) in enumerate(results):
            if missing:
                witnesses.append(f"x#{k}: {format_points(missing)} not matched")
        report = TheoremReport(
            theorem="e^{t sigma_A(x)} in sigma_T(t)(x)",
            instance=Instance(generator=name, t=float(t)),
            lhs=[complex_pairs(mapped) for mapped, *_ in results],
            rhs=[complex_pairs(rhs) for _, rhs, *_ in results],
            included=included, witnesses=witnesses)
        logger.info(f"local spectrum inclusion for {name}, t={t:g}: "
                    f"{'holds' if included else 'VIOLATED'} ({len(witnesses)} witnesses)")
        return report

    def verify_svep_inclusion(self, A, t: float, grid: Sequence[complex], name: str = "A",
                              depth: Optional[int] = None) -> TheoremReport:
        """S(T(t)) ⊆ e^{t S(A)}; in finite dimension both sides are empty and X_T(t)(∅) = {0}"""
        A = as_matrix(A)
        T = self.cauchy.semigroup_at(A, t)
        scan_A = self.svep_scan(A, grid, depth)
        scan_T = self.svep_scan(T, [np.exp(t * mu) for mu in grid], depth)
        mapped = [complex(np.exp(t * mu)) for mu in scan_A.members]
        missing = match_points(scan_T.members, mapped, self._match_tol(A, t))
        empty_T = self.empty_set_subspace(T)
        witnesses = [
            f"X_T(t)(∅) has dimension {empty_T.dim}",
            f"max shadow growth of A on the grid: {max(scan_A.shadow_growth, default=0.0):.6g}",
            f"max shadow growth of T(t) on the grid: {max(scan_T.shadow_growth, default=0.0):.6g}",
        ]
        return TheoremReport(theorem="S(T(t)) in e^{t S(A)}", instance=Instance(generator=name, t=float(t)),
                             lhs=complex_pairs(scan_T.members), rhs=complex_pairs(mapped),
                             included=not missing and empty_T.is_zero, witnesses=witnesses)

    def _subspace_inclusion(self, theorem: str, instance: Instance, lhs: Subspace, rhs: Subspace,
                            extra: str = "") -> TheoremReport:
        residual = self.linalg.containment_residual(rhs, lhs)
        witnesses = [f"residual {residual:.3e}"] + ([extra] if extra else [])
        return TheoremReport(theorem=theorem, instance=instance, lhs=[lhs.dim], rhs=[rhs.dim],
                             included=residual <= self.linalg.contain_tol, witnesses=witnesses)

    def verify_core_inclusions(self, A, lam: complex, t: float, name: str = "A") -> List[TheoremReport]:
        """
        Core transport between lambda - A, e^{lambda t} - T(t) and B_lambda(t):
        inclusions, the intersection equality, the SVEP-at-0 reading and core spectra
        """
        A = as_matrix(A)
        n = A.shape[0]
        instance = Instance(generator=name, lambda_=complex_pair(lam), t=float(t))
        L = lam * np.eye(n) - A
        E = np.exp(lam * t) * np.eye(n) - self.cauchy.semigroup_at(A, t)
        B = self.cauchy.build_B(A, lam, t)
        cores_L = self.cores(L, scale=CauchyService.shift_scale(A, lam))
        cores_E = self.cores(E, scale=self.cauchy.gap_scale(A, lam, t))
        cores_B = self.cores(B, scale=opnorm(B))

        reports = []
        for label, c in (("l-A", cores_L), ("e^{lt}-T(t)", cores_E), ("B", cores_B)):
            reports.append(self._subspace_inclusion(f"K({label}) in C({label})", instance, c.K, c.C))
            reports.append(self._subspace_inclusion(f"C({label}) in R^inf({label})", instance, c.C, c.hyper_range))

        reports.append(self._subspace_inclusion("K(e^{lt}-T(t)) in K(l-A)", instance, cores_E.K, cores_L.K))
        reports.append(self._subspace_inclusion("C(e^{lt}-T(t)) in C(l-A)", instance, cores_E.C, cores_L.C))
        reports.append(self._subspace_inclusion("K(B) ∩ K(l-A) in K(e^{lt}-T(t))", instance,
                                                self.linalg.intersect(cores_B.K, cores_L.K), cores_E.K))
        reports.append(self._subspace_inclusion("C(B) ∩ C(l-A) in C(e^{lt}-T(t))", instance,
                                                self.linalg.intersect(cores_B.C, cores_L.C), cores_E.C))

        left = self.linalg.intersect(cores_E.K, cores_B.K)
        right = self.linalg.intersect(cores_L.K, cores_B.K)
        forward = self.linalg.containment_residual(right, left)
        backward = self.linalg.containment_residual(left, right)
        reports.append(TheoremReport(
            theorem="K(e^{lt}-T(t)) ∩ K(B) = K(l-A) ∩ K(B)", instance=instance,
            lhs=[left.dim], rhs=[right.dim],
            included=max(forward, backward) <= self.linalg.contain_tol,
            witnesses=[f"residuals {forward:.3e} / {backward:.3e}"]))

        at_zero = [self.svep_scan(M, [0j]).members for M in (B, L, E)]
        fails_B, fails_L, fails_E = (bool(m) for m in at_zero)
        reports.append(TheoremReport(
            theorem="0 in S(B) ∩ S(l-A) implies 0 in S(e^{lt}-T(t))", instance=instance,
            lhs=[fails_B and fails_L], rhs=[fails_E],
            included=(not (fails_B and fails_L)) or fails_E,
            witnesses=["SVEP holds at 0 for every matrix; the implication is vacuous"]))

        T = self.cauchy.semigroup_at(A, t)
        tol = self._match_tol(A, t)
        ac_A, alc_A = self.core_spectra(A)
        ac_T, alc_T = self.core_spectra(T)
        for label, source, target in (("ac", ac_A, ac_T), ("alc", alc_A, alc_T)):
            mapped = [complex(np.exp(t * z)) for z in source]
            missing = match_points(mapped, target, tol)
            reports.append(TheoremReport(
                theorem=f"e^{{t sigma_{label}(A)}} in sigma_{label}(T(t))", instance=instance,
                lhs=complex_pairs(mapped), rhs=complex_pairs(target), included=not missing,
                witnesses=[f"{format_points(missing)} not matched"] if missing else []))

        failed = [r.theorem for r in reports if not r.included]
        if failed:
            logger.error(f"core inclusions failed for {name}: {failed}")
        else:
            logger.info(f"core inclusions hold for {name} at lambda={lam:.6g}, t={t:g}")
        return reports

    def classical_spectra_inclusion(self, A, t: float, name: str = "A") -> TheoremReport:
        """
        e^{t sigma(A)} ⊆ sigma(T(t)) with point, approximate point and residual
        spectra collapsing to sigma and ∅ for matrices; equality is recorded too
        """
        A = as_matrix(A)
        T = self.cauchy.semigroup_at(A, t)
        sigma_A = self.linalg.eig_decompose(A).eigenvalues
        decomp_T = self.linalg.eig_decompose(T, name="T(t)")
        sigma_T = decomp_T.eigenvalues
        mapped = [complex(np.exp(t * z)) for z in sigma_A]
        tol = self._match_tol(A, t, decomp_T)
        missing = match_points(mapped, sigma_T, tol)
        uncovered = match_points(sigma_T, mapped, tol)

        witnesses = []
        for target in sigma_T:
            sources = [z for z, w in zip(sigma_A, mapped) if abs(w - target) <= tol]
            if len(sources) > 1:
                witnesses.append(f"{format_points(sources)} map to {format_points([target])}")
        witnesses.append("equality holds" if not missing and not uncovered else
                         f"uncovered: {format_points(uncovered)}")
        witnesses.append("residual spectrum empty on both sides")
        return TheoremReport(theorem="e^{t sigma(A)} in sigma(T(t))", instance=Instance(generator=name, t=float(t)),
                             lhs=complex_pairs(mapped), rhs=complex_pairs(sigma_T), included=not missing,
                             witnesses=witnesses)
