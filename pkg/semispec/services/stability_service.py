"""
Strong and uniform stability criteria read off local spectra, cross-checked by simulation
"""
import logging
import os
from typing import List, Optional, Sequence

import numpy as np

from ..config import settings
from ..models.errors import MatrixError
from ..models.schemas import GeneratorSpec, StabilityVerdict, as_vector
from ..utils.format_utils import complex_pairs
from ..utils.sweep_utils import ordered_map
from .cauchy_service import CauchyService
from .linalg_service import LinalgService, opnorm
from .local_spectral_service import LocalSpectralService
from .semigroup_service import SemigroupService

logger = logging.getLogger(__name__)

STRONG_DECAY = 1e-3
GAP_HORIZON = 20.0
UNDERFLOW_FLOOR = 1e-300
POWER_FLOOR = 1e-280
MAX_POWERS = 60
RATIO_REL = 0.1


class StabilityService:
    def __init__(self, linalg: LinalgService, semigroup: SemigroupService, local: LocalSpectralService,
                 axis_tol: float = settings.AXIS_TOL):
        self.linalg = linalg
        self.semigroup = semigroup
        self.local = local
        self.axis_tol = axis_tol

    def stability_class(self, spec: GeneratorSpec) -> str:
        """uniformly-stable, bounded (semisimple on iR) or unbounded"""
        A = spec.A
        n = spec.dim
        abscissa = self.linalg.spectral_abscissa(A)
        if abscissa < -self.axis_tol:
            return "uniformly-stable"
        if abscissa > self.axis_tol:
            return "unbounded"
        for cluster in self.linalg.eig_decompose(A).clusters:
            lam = cluster.eigenvalue
            if abs(lam.real) > self.axis_tol:
                continue
            kernel = self.linalg.kernel(A - lam * np.eye(n), tol=self.linalg.cluster_tol_rel,
                                        scale=CauchyService.shift_scale(A, lam))
            if kernel.dim < cluster.multiplicity:
                # Jordan block on the imaginary axis grows polynomially
                return "unbounded"
        return "bounded"

    def _spectral_union(self, A: np.ndarray, samples: Sequence[np.ndarray]) -> List[complex]:
        decomp = self.linalg.eig_decompose(A)
        union = list(self.local.basis_sweep_spectrum(A, decomp))
        for x in samples:
            for z in self.local.local_spectrum(A, x, decomp=decomp).points:
                if z not in union:
                    union.append(z)
        return union

    def _hypothesis_failure(self, mode: str, spec: GeneratorSpec, cls: str) -> StabilityVerdict:
        omega = self.linalg.spectral_abscissa(spec.A)
        logger.warning(f"{spec.name}: semigroup is {cls} (omega = {omega:.6g}); {mode} criterion not applicable")
        return StabilityVerdict(mode=mode, status="hypothesis-not-met", hypothesis_met=False,
                                criterion_holds=False,
                                criterion_evidence={"omega": omega, "class": cls},
                                simulation_agrees=True, decay_rate=None)

    def decay_rate_estimate(self, spec: GeneratorSpec, x, grid: Sequence[float]) -> float:
        """Least-squares slope of log ||T(t)x|| against t over the tail half of the grid"""
        x = as_vector(x, spec.dim)
        grid = [float(t) for t in grid]
        if len(grid) < 4:
            raise MatrixError(f"decay grid needs at least 4 points, got {len(grid)}")
        rows = self.semigroup.trajectory(spec, x, grid)
        start = len(rows) // 2
        tail = [(t, nrm) for t, nrm in rows[start:] if nrm > UNDERFLOW_FLOOR]
        if len(tail) < 2:
            logger.warning(f"{spec.name}: trajectory fell below {UNDERFLOW_FLOOR:g} before the tail; "
                           f"fitting the last points above the floor")
            tail = [(t, nrm) for t, nrm in rows if nrm > UNDERFLOW_FLOOR][-max(2, len(rows) // 2):]
        if len(tail) < 2:
            return float("nan")
        norms = [nrm for _, nrm in rows if nrm > UNDERFLOW_FLOOR]
        if np.log(max(norms) / min(norms)) < np.log(100.0) and max(norms) / min(norms) > 1.0 + 1e-9:
            logger.warning(f"{spec.name}: decay grid spans less than two decades")
        ts, ns = zip(*tail)
        return float(np.polyfit(ts, np.log(ns), 1)[0])

    def strong_stability_check(self, spec: GeneratorSpec, x_samples: Sequence,
                               t_max: Optional[float] = None) -> StabilityVerdict:
        """
        No local spectrum (over the samples and a basis sweep) meets iR, checked
        against ||T(t_max) x|| / ||x|| < 1e-3 with t_max = 20 / gap by default
        """
        cls = self.stability_class(spec)
        if cls == "unbounded":
            return self._hypothesis_failure("strong", spec, cls)
        A = spec.A
        samples = [as_vector(x, spec.dim) for x in x_samples]

        union = self._spectral_union(A, samples)
        on_axis = [z for z in union if abs(z.real) <= self.axis_tol]
        criterion = not on_axis
        sigma_su, sigma_K = self.local.surjectivity_and_semiregular_spectra(A)

        abscissa = self.linalg.spectral_abscissa(A)
        gap = -abscissa
        if t_max is None:
            t_max = GAP_HORIZON / gap if gap > self.axis_tol else GAP_HORIZON
        probes = samples + [np.ones(spec.dim, dtype=complex)]

        def ratio(x):
            nx = float(np.linalg.norm(x))
            if nx == 0.0:
                return 0.0
            return float(np.linalg.norm(self.semigroup.evaluate_T(spec, t_max) @ x)) / nx

        ratios = ordered_map(ratio, probes, label="strong_stability")
        decays = all(r < STRONG_DECAY for r in ratios)
        rate = self.decay_rate_estimate(spec, np.ones(spec.dim), np.linspace(0.0, t_max, 200))

        verdict = StabilityVerdict(
            mode="strong", status="stable" if criterion else "not-stable", hypothesis_met=True,
            criterion_holds=criterion,
            criterion_evidence={
                "class": cls,
                "omega": abscissa,
                "local_spectra_union": complex_pairs(union),
                "local_spectra_on_axis": complex_pairs(on_axis),
                "sigma_su_on_axis": complex_pairs(z for z in sigma_su if abs(z.real) <= self.axis_tol),
                "sigma_K_on_axis": complex_pairs(z for z in sigma_K if abs(z.real) <= self.axis_tol),
                "t_max": t_max,
                "final_ratios": ratios,
            },
            simulation_agrees=decays == criterion, decay_rate=rate)
        if criterion and not decays:
            logger.error(f"{spec.name}: strong criterion holds but trajectories did not decay by t={t_max:g}")
        return verdict

    def power_norms(self, T0: np.ndarray, n_max: int = MAX_POWERS) -> List[float]:
        """||T0^n|| for n = 1.. until n_max or the norm underflows"""
        norms = []
        P = np.eye(T0.shape[0], dtype=complex)
        for _ in range(n_max):
            P = P @ T0
            nrm = opnorm(P)
            if nrm < POWER_FLOOR:
                break
            norms.append(nrm)
        return norms

    def uniform_stability_check(self, spec: GeneratorSpec, t0: float, x_samples: Sequence) -> StabilityVerdict:
        """
        No local spectrum of T(t0) meets the unit circle and r(T(t0)) < 1, checked
        against the geometric ratio of ||T(t0)^n||
        """
        if t0 < 0:
            raise MatrixError(f"t0 must be nonnegative, got {t0}")
        cls = self.stability_class(spec)
        if cls == "unbounded":
            return self._hypothesis_failure("uniform", spec, cls)
        samples = [as_vector(x, spec.dim) for x in x_samples]
        T0 = self.semigroup.evaluate_T(spec, t0)

        union = self._spectral_union(T0, samples)
        on_circle = [z for z in union if abs(abs(z) - 1.0) <= self.axis_tol]
        radius = self.linalg.spectral_radius(T0)
        local_ok = not on_circle and all(abs(z) < 1.0 for z in union)
        radius_ok = radius < 1.0 - self.axis_tol
        if local_ok != radius_ok:
            logger.error(f"{spec.name}: local-spectrum and spectral-radius criteria disagree at t0={t0:g}")
        criterion = local_ok and radius_ok

        norms = self.power_norms(T0)
        if len(norms) >= 2:
            start = len(norms) // 2
            ns = np.arange(1, len(norms) + 1)[start:]
            slope = np.polyfit(ns, np.log(norms[start:]), 1)[0] if len(ns) >= 2 else np.log(norms[-1] / norms[-2])
            ratio = float(np.exp(slope))
        else:
            # T0^2 already underflows
            ratio = 0.0
        decays = ratio < 1.0 - self.axis_tol
        ratio_ok = abs(ratio - radius) <= RATIO_REL * max(radius, POWER_FLOOR) or (len(norms) < 2 and radius < 1e-140)

        rate = float(np.log(radius) / t0) if t0 > 0 and radius > 0 else None
        return StabilityVerdict(
            mode="uniform", status="stable" if criterion else "not-stable", hypothesis_met=True,
            criterion_holds=criterion,
            criterion_evidence={
                "class": cls,
                "t0": t0,
                "spectral_radius": radius,
                "local_spectra_union": complex_pairs(union),
                "local_spectra_on_circle": complex_pairs(on_circle),
                "local_criterion": local_ok,
                "radius_criterion": radius_ok,
                "power_ratio": ratio,
                "power_norms": norms,
            },
            simulation_agrees=(decays == criterion) and ratio_ok, decay_rate=rate)

    def write_trajectories(self, spec: GeneratorSpec, x_samples: Sequence, grid: Sequence[float],
                           path: str) -> List[str]:
        """One `t,norm` CSV per sample: <stem>_x<k>.csv"""
        stem, ext = os.path.splitext(path)
        written = []
        for k, x in enumerate(x_samples):
            rows = self.semigroup.trajectory(spec, x, grid)
            written.append(self.semigroup.write_trajectory_csv(f"{stem}_x{k}{ext or '.csv'}", rows))
        return written
