"""
Semigroup engine: T(t) = e^{tA}, axiom certification and growth bounds
"""
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..config import settings
from ..models.errors import MatrixError
from ..models.schemas import (
    GeneratorSpec, GrowthBound, Instance, ResidualEntry, ResidualReport, as_vector,
)
from ..utils.format_utils import write_csv
from ..utils.sweep_utils import ordered_map
from .linalg_service import LinalgService, opnorm

logger = logging.getLogger(__name__)

MAX_EXPONENT = 1e3


class SemigroupService:
    def __init__(self, linalg: LinalgService, identity_tol: float = settings.IDENTITY_TOL):
        self.linalg = linalg
        self.identity_tol = identity_tol

    def evaluate_T(self, spec: GeneratorSpec, t: float) -> np.ndarray:
        """T(t) = expm(tA); T(0) is the identity exactly"""
        if t < 0:
            raise MatrixError(f"t must be nonnegative, got {t}")
        n = spec.dim
        if t == 0:
            return np.eye(n, dtype=complex)
        if t * opnorm(spec.A) > MAX_EXPONENT:
            logger.warning(f"{spec.name}: t*||A|| = {t * opnorm(spec.A):.3e} exceeds {MAX_EXPONENT:g}")
        return self.linalg.expm(t * spec.A)

    def spectral_abscissa(self, spec: GeneratorSpec) -> float:
        return self.linalg.spectral_abscissa(spec.A)

    def growth_bound(self, spec: GeneratorSpec, t_max: float = 10.0, samples: int = 201,
                     omega_margin: float = 1e-9, omega: Optional[float] = None) -> GrowthBound:
        """
        ||T(t)|| <= M e^{omega t} with omega the spectral abscissa plus a margin and
        M the sampled maximum of ||T(t)|| e^{-omega t}
        """
        if t_max <= 0:
            raise MatrixError(f"t_max must be positive, got {t_max}")
        if samples < 2:
            raise MatrixError(f"growth_bound needs at least 2 samples, got {samples}")
        if omega is None:
            omega = self.spectral_abscissa(spec) + omega_margin

        grid = np.linspace(0.0, t_max, samples)
        norms = ordered_map(lambda t: opnorm(self.evaluate_T(spec, t)), grid, label="growth_bound")
        M = max(float(nrm * np.exp(-omega * t)) for t, nrm in zip(grid, norms))
        return GrowthBound(M=max(M, 1.0), omega=float(omega))

    def trajectory(self, spec: GeneratorSpec, x, grid: Sequence[float]) -> List[Tuple[float, float]]:
        """(t, ||T(t)x||) for every grid point, in grid order"""
        x = as_vector(x, spec.dim)
        grid = [float(t) for t in grid]
        if any(t < 0 for t in grid):
            raise MatrixError("trajectory grid must be nonnegative")
        if any(b < a for a, b in zip(grid, grid[1:])):
            raise MatrixError("trajectory grid must be increasing")

        def norm_at(t):
            return float(np.linalg.norm(self.evaluate_T(spec, t) @ x))

        norms = ordered_map(norm_at, grid, label="trajectory")
        return list(zip(grid, norms))

    def write_trajectory_csv(self, path: str, rows: Sequence[Tuple[float, float]]) -> str:
        return write_csv(path, ("t", "norm"), rows)

    def certify_axioms(self, spec: GeneratorSpec, samples: int = 20, seed: int = settings.SEED) -> ResidualReport:
        """T(0) = I, the cocycle identity and the strong-continuity surrogate"""
        n = spec.dim
        rng = np.random.default_rng(seed)
        entries = []

        T0 = self.evaluate_T(spec, 0.0)
        entries.append(ResidualEntry(identity="T(0) = I", residual=opnorm(T0 - np.eye(n)),
                                     scale=1.0, passed=bool(np.array_equal(T0, np.eye(n)))))

        worst, worst_scale = 0.0, 1.0
        for t, s in rng.uniform(0.0, 5.0, size=(samples, 2)):
            Tts = self.evaluate_T(spec, t + s)
            defect = opnorm(Tts - self.evaluate_T(spec, t) @ self.evaluate_T(spec, s))
            scale = 1.0 + opnorm(Tts)
            if defect / scale >= worst / worst_scale:
                worst, worst_scale = defect, scale
        entries.append(ResidualEntry(identity="T(t+s) = T(t)T(s)", residual=worst, scale=worst_scale,
                                     passed=worst <= self.identity_tol * worst_scale))

        x = np.ones(n, dtype=complex)
        steps = [2.0 ** -k for k in range(21)]
        defects = [float(np.linalg.norm(self.evaluate_T(spec, h) @ x - x)) for h in steps]
        normA = opnorm(spec.A)
        tail = [d for h, d in zip(steps, defects) if h * normA <= 1.0]
        monotone = all(b <= a * (1 + 1e-6) + 1e-14 for a, b in zip(tail, tail[1:]))
        final = defects[-1]
        entries.append(ResidualEntry(identity="T(h)x -> x as h -> 0", residual=final,
                                     scale=float(np.linalg.norm(x)),
                                     passed=monotone and final <= 1e-5 * (1.0 + normA) * np.linalg.norm(x)))

        return ResidualReport(report="certify_axioms", instance=Instance(generator=spec.name),
                              entries=entries, extras={"continuity_defects": defects})
