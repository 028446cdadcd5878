"""
Cauchy-problem operators of a matrix semigroup

    B_lambda(t) = int_0^t e^{lambda (t-s)} T(s) ds
    F_lambda(t) = int_0^t e^{-lambda s} B_lambda(s) ds
    G_lambda(t) = e^{-lambda t} I

evaluated by three independent routes, plus the identities linking them to
lambda - A and e^{lambda t} - T(t).
"""
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from numpy.polynomial.legendre import leggauss

from ..config import settings
from ..models.errors import MatrixError, NearSingularError, PreconditionError
from ..models.schemas import (
    CauchyOps, GeneratorSpec, Instance, ResidualEntry, ResidualReport, Route, as_matrix, as_vector,
)
from ..utils.format_utils import complex_pair
from .linalg_service import LinalgService, opnorm
from .semigroup_service import SemigroupService

logger = logging.getLogger(__name__)

GAUSS_ORDER = 16
MAX_REFINEMENTS = 8
NEAR_SINGULAR_REL = 1e-6


class CauchyService:
    def __init__(self, linalg: LinalgService, semigroup: SemigroupService,
                 identity_tol: float = settings.IDENTITY_TOL,
                 power_tol: float = settings.POWER_TOL,
                 quad_atol: float = settings.QUAD_ATOL):
        self.linalg = linalg
        self.semigroup = semigroup
        self.identity_tol = identity_tol
        self.power_tol = power_tol
        self.quad_atol = quad_atol
        self._nodes, self._weights = leggauss(GAUSS_ORDER)

    @staticmethod
    def _check_time(t: float):
        if t < 0:
            raise MatrixError(f"t must be nonnegative, got {t}")

    def semigroup_at(self, A: np.ndarray, t: float) -> np.ndarray:
        if t == 0:
            return np.eye(A.shape[0], dtype=complex)
        return self.linalg.expm(t * A)

    def scale(self, A: np.ndarray, lam: complex, t: float) -> float:
        """t (1 + ||A||) max(1, e^{Re(lambda) t})"""
        return float(t * (1.0 + opnorm(A)) * max(1.0, np.exp(np.real(lam) * t)))

    @staticmethod
    def shift_scale(A: np.ndarray, lam: complex) -> float:
        """Magnitude reference for lambda - A"""
        return float(max(abs(lam), opnorm(A), 1e-300))

    def gap_scale(self, A: np.ndarray, lam: complex, t: float) -> float:
        """Magnitude reference for e^{lambda t} - T(t)"""
        return float(max(abs(np.exp(lam * t)), opnorm(self.semigroup_at(A, t))))

    def _instance(self, name: str, lam: complex, t: float) -> Instance:
        return Instance(generator=name, lambda_=complex_pair(lam), t=float(t))

    def _gap_operator(self, A: np.ndarray, lam: complex, t: float) -> np.ndarray:
        """e^{lambda t} I - T(t)"""
        n = A.shape[0]
        return np.exp(lam * t) * np.eye(n) - self.semigroup_at(A, t)

    def _resolvent_check(self, A: np.ndarray, lam: complex):
        eigs = self.linalg.eigenvalues(A)
        dist = float(np.min(np.abs(eigs - lam)))
        limit = NEAR_SINGULAR_REL * opnorm(A)
        if dist <= limit:
            raise NearSingularError(
                f"resolventForm undefined: dist(lambda, sigma(A)) = {dist:.3e} <= {limit:.3e}; "
                f"use the blockExp route")

    def _panel_integral(self, C: np.ndarray, t: float, weight, panels: int) -> np.ndarray:
        """Composite Gauss-Legendre of int_0^t weight(s) e^{sC} ds over equal panels"""
        n = C.shape[0]
        h = t / panels
        offsets = 0.5 * h * (self._nodes + 1.0)
        local = [self.linalg.expm(s * C) for s in offsets]
        step = self.linalg.expm(h * C)

        total = np.zeros((n, n), dtype=complex)
        start = np.eye(n, dtype=complex)
        for p in range(panels):
            a = p * h
            for s, w, E in zip(offsets, self._weights, local):
                total += (0.5 * h * w * weight(a + s)) * (start @ E)
            start = start @ step
        return total

    def _adaptive_integral(self, C: np.ndarray, t: float, weight, label: str) -> np.ndarray:
        panels = max(1, int(np.ceil(opnorm(C) * t / 2.0)))
        current = self._panel_integral(C, t, weight, panels)
        for _ in range(MAX_REFINEMENTS):
            panels *= 2
            refined = self._panel_integral(C, t, weight, panels)
            defect = opnorm(refined - current)
            current = refined
            if defect <= self.quad_atol * max(1.0, opnorm(current)):
                return current
        logger.warning(f"{label} quadrature stopped at {panels} panels without reaching {self.quad_atol:g}")
        return current

    def build_B(self, A, lam: complex, t: float, method: Route = Route.BLOCK_EXP) -> np.ndarray:
        """B_lambda(t) = e^{lambda t} int_0^t e^{s(A - lambda)} ds"""
        A = as_matrix(A)
        self._check_time(t)
        method = Route(method)
        n = A.shape[0]
        if t == 0:
            return np.zeros((n, n), dtype=complex)
        C = A - lam * np.eye(n)

        if method is Route.BLOCK_EXP:
            # top-right block of exp(t [[0, I], [0, C]]) is int_0^t e^{sC} ds
            M = np.zeros((2 * n, 2 * n), dtype=complex)
            M[:n, n:] = np.eye(n)
            M[n:, n:] = C
            inner = self.linalg.expm(t * M)[:n, n:]
            return np.exp(lam * t) * inner

        if method is Route.RESOLVENT:
            self._resolvent_check(A, lam)
            L = lam * np.eye(n) - A
            return scipy.linalg.solve(L, self._gap_operator(A, lam, t))

        inner = self._adaptive_integral(C, t, lambda s: 1.0, "B")
        return np.exp(lam * t) * inner

    def build_F(self, A, lam: complex, t: float, method: Route = Route.BLOCK_EXP) -> np.ndarray:
        """F_lambda(t) = int_0^t (t - s) e^{s(A - lambda)} ds"""
        A = as_matrix(A)
        self._check_time(t)
        method = Route(method)
        n = A.shape[0]
        if t == 0:
            return np.zeros((n, n), dtype=complex)
        C = A - lam * np.eye(n)

        if method is Route.BLOCK_EXP:
            # (1,3) block of exp(t [[0, I, 0], [0, 0, I], [0, 0, C]])
            M = np.zeros((3 * n, 3 * n), dtype=complex)
            M[:n, n:2 * n] = np.eye(n)
            M[n:2 * n, 2 * n:] = np.eye(n)
            M[2 * n:, 2 * n:] = C
            return self.linalg.expm(t * M)[:n, 2 * n:]

        if method is Route.RESOLVENT:
            self._resolvent_check(A, lam)
            L = lam * np.eye(n) - A
            first = scipy.linalg.solve(L, t * np.eye(n))
            second = scipy.linalg.solve(L, scipy.linalg.solve(L, self.linalg.expm(t * C) - np.eye(n)))
            return first + second

        # Swapping the order of the double integral of e^{-lambda s} B(s)
        # leaves the single weight (t - s)
        return self._adaptive_integral(C, t, lambda s: t - s, "F")

    def cauchy_ops(self, A, lam: complex, t: float, method: Route = Route.BLOCK_EXP) -> CauchyOps:
        A = as_matrix(A)
        method = Route(method)
        B = self.build_B(A, lam, t, method)
        F = self.build_F(A, lam, t, method)
        G = complex(np.exp(-lam * t))
        n = A.shape[0]
        L = lam * np.eye(n) - A
        scale = self.scale(A, lam, t)
        for label, residual in (
            ("factorization", opnorm(L @ B - self._gap_operator(A, lam, t))),
            ("(lambda-A)F + G B = tI", opnorm(L @ F + G * B - t * np.eye(n))),
        ):
            if residual > self.identity_tol * scale + 1e-14:
                logger.warning(f"cauchy_ops({method.value}): {label} residual {residual:.3e} "
                               f"exceeds {self.identity_tol:g} * {scale:.3e}")
        return CauchyOps(lam=complex(lam), t=float(t), B=B, F=F, G_scalar=G, method=method)

    def compare_routes(self, A, lam: complex, t: float) -> dict:
        """Relative deviations of quadrature and resolventForm from blockExp"""
        A = as_matrix(A)
        reference = {"B": self.build_B(A, lam, t), "F": self.build_F(A, lam, t)}
        routes = [Route.QUADRATURE, Route.RESOLVENT]
        deviations = {}
        for route in routes:
            for key, build in (("B", self.build_B), ("F", self.build_F)):
                try:
                    value = build(A, lam, t, route)
                except NearSingularError:
                    continue
                ref = reference[key]
                deviations[f"{key}:{route.value}"] = opnorm(value - ref) / max(opnorm(ref), 1e-300)
        return deviations

    def factorization_residuals(self, A, lam: complex, t: float, name: str = "A") -> ResidualReport:
        A = as_matrix(A)
        n = A.shape[0]
        B = self.build_B(A, lam, t)
        L = lam * np.eye(n) - A
        E = self._gap_operator(A, lam, t)
        scale = self.scale(A, lam, t)
        entries = [
            ResidualEntry.check("e^{lt}-T(t) = (l-A)B", opnorm(E - L @ B), scale, self.identity_tol),
            ResidualEntry.check("e^{lt}-T(t) = B(l-A)", opnorm(E - B @ L), scale, self.identity_tol),
        ]
        return ResidualReport(report="factorization", instance=self._instance(name, lam, t), entries=entries)

    def verify_cauchy_identities(self, A, lam: complex, t: float, name: str = "A") -> ResidualReport:
        """
        (lambda - A) F + G B = tI, pairwise commutation of F, B, G and lambda - A,
        and the exponential bound on ||F|| from a growth bound (M, omega)
        """
        A = as_matrix(A)
        self._check_time(t)
        n = A.shape[0]
        ops = self.cauchy_ops(A, lam, t)
        B, F, G = ops.B, ops.F, ops.G_scalar
        L = lam * np.eye(n) - A
        scale = self.scale(A, lam, t)
        tol = self.identity_tol

        entries = [
            ResidualEntry.check("(l-A)F + G B = tI", opnorm(L @ F + G * B - t * np.eye(n)), scale, tol),
            ResidualEntry.check("F(l-A) + G B = tI", opnorm(F @ L + G * B - t * np.eye(n)), scale, tol),
            ResidualEntry.check("[F, B] = 0", opnorm(F @ B - B @ F), opnorm(F) * opnorm(B), tol),
            ResidualEntry.check("[F, l-A] = 0", opnorm(F @ L - L @ F), opnorm(F) * opnorm(L), tol),
            ResidualEntry.check("[B, l-A] = 0", opnorm(B @ L - L @ B), opnorm(B) * opnorm(L), tol),
        ]

        omega = self.linalg.spectral_abscissa(A) + 1.0
        spec = GeneratorSpec(name=name, A=A)
        bound = self.semigroup.growth_bound(spec, t_max=2.0 * max(t, 1.0), omega=omega)
        gap = omega - float(np.real(lam))
        normF = opnorm(F)
        # the bound only exists for Re(lambda) < omega
        bound_checked = bool(gap > 0)
        if bound_checked:
            envelope = bound.M / gap ** 2 * np.exp(gap * t)
            entries.append(ResidualEntry(identity="||F|| <= M e^{(w-Re l)t} / (w-Re l)^2",
                                         residual=max(0.0, normF - envelope), scale=float(envelope),
                                         passed=bool(normF <= envelope)))
        else:
            logger.debug(f"F bound skipped for {name}: Re(lambda) = {np.real(lam):.6g} >= omega = {omega:.6g}")

        report = ResidualReport(report="cauchy_identities", instance=self._instance(name, lam, t),
                                entries=entries,
                                extras={"M": bound.M, "omega": bound.omega, "norm_F": normF,
                                        "bound_checked": bound_checked,
                                        "routes": self.compare_routes(A, lam, t) if t > 0 else {}})
        logger.info(f"cauchy identities for {name}: {'pass' if report.all_passed else 'FAIL'}")
        return report

    def verify_power_identities(self, A, lam: complex, t: float, n_max: int = 4,
                                name: str = "A") -> ResidualReport:
        """(e^{lt} - T(t))^n = (l - A)^n B^n, kernel and hyper-range inclusions"""
        A = as_matrix(A)
        self._check_time(t)
        if not 1 <= n_max <= 6:
            raise MatrixError(f"n_max must lie in 1..6, got {n_max}")
        n = A.shape[0]
        B = self.build_B(A, lam, t)
        L = lam * np.eye(n) - A
        E = self._gap_operator(A, lam, t)
        scale = self.scale(A, lam, t)
        scale_L = self.shift_scale(A, lam)
        scale_E = self.gap_scale(A, lam, t)

        entries = []
        for k in range(1, n_max + 1):
            Ek = np.linalg.matrix_power(E, k)
            Lk = np.linalg.matrix_power(L, k)
            Bk = np.linalg.matrix_power(B, k)
            entries.append(ResidualEntry.check(f"(e^{{lt}}-T(t))^{k} = (l-A)^{k} B^{k}",
                                               opnorm(Ek - Lk @ Bk), scale ** k, self.power_tol))
            kernel_L = self.linalg.kernel(Lk, tol=self.linalg.cluster_tol_rel, scale=scale_L ** k)
            kernel_E = self.linalg.kernel(Ek, tol=self.linalg.cluster_tol_rel, scale=scale_E ** k)
            residual = self.linalg.containment_residual(kernel_E, kernel_L)
            entries.append(ResidualEntry(identity=f"N((l-A)^{k}) in N((e^{{lt}}-T(t))^{k})",
                                         residual=residual, scale=1.0,
                                         passed=residual <= self.linalg.contain_tol))

        range_E = self.linalg.hyper_range(E, scale=scale_E)
        range_L = self.linalg.hyper_range(L, scale=scale_L)
        residual = self.linalg.containment_residual(range_L, range_E)
        entries.append(ResidualEntry(identity="R^inf(e^{lt}-T(t)) in R^inf(l-A)", residual=residual,
                                     scale=1.0, passed=residual <= self.linalg.contain_tol))

        report = ResidualReport(report="power_identities", instance=self._instance(name, lam, t),
                                entries=entries)
        logger.info(f"power identities for {name} up to n={n_max}: {'pass' if report.all_passed else 'FAIL'}")
        return report

    def lift_w(self, A, lam: complex, t: float, u, v,
               hypothesis_tol: float = 1e-8, post_tol: float = 1e-7) -> Tuple[np.ndarray, ResidualReport]:
        """
        Given (lambda - A) u = B v, w = (F v + G u) / t solves (lambda - A) w = v and B w = u,
        since (lambda - A) F + G B = tI
        """
        A = as_matrix(A)
        n = A.shape[0]
        self._check_lift_time(t)
        u = as_vector(u, n, "u")
        v = as_vector(v, n, "v")
        ops = self.cauchy_ops(A, lam, t)
        L = lam * np.eye(n) - A
        size = float(np.linalg.norm(u) + np.linalg.norm(v))

        defect = float(np.linalg.norm(L @ u - ops.B @ v))
        if defect > hypothesis_tol * size:
            raise PreconditionError(f"(lambda-A)u != B v: defect {defect:.3e} exceeds "
                                    f"{hypothesis_tol:g} * {size:.3e}", defect=defect)

        w = (ops.F @ v + ops.G_scalar * u) / t
        bound = (opnorm(ops.F) + abs(ops.G_scalar)) / t * max(np.linalg.norm(u), np.linalg.norm(v))
        normw = float(np.linalg.norm(w))
        entries = [
            ResidualEntry.check("(l-A)w = v", np.linalg.norm(L @ w - v), size, post_tol),
            ResidualEntry.check("B w = u", np.linalg.norm(ops.B @ w - u), size, post_tol),
            ResidualEntry(identity="||w|| <= (||F||+|G|)/t max(||u||,||v||)",
                          residual=max(0.0, normw - bound), scale=float(bound),
                          passed=bool(normw <= bound * (1 + 1e-8) + 1e-300)),
        ]
        report = ResidualReport(report="lift_w", instance=self._instance("A", lam, t), entries=entries,
                                extras={"hypothesis_defect": defect})
        return w, report

    @staticmethod
    def _check_lift_time(t: float):
        if not t > 0:
            raise PreconditionError(f"lifting needs t > 0: B and F vanish at t = {t}")

    def _check_chain(self, M: np.ndarray, chain: Sequence[np.ndarray], label: str, tol: float):
        for i in range(1, len(chain)):
            defect = float(np.linalg.norm(M @ chain[i] - chain[i - 1]))
            size = float(np.linalg.norm(chain[i]) + np.linalg.norm(chain[i - 1]))
            if defect > tol * max(size, 1e-300) * (1.0 + opnorm(M)):
                raise PreconditionError(f"{label} chain broken at step {i}: defect {defect:.3e}", defect=defect)

    def build_double_chain(self, A, lam: complex, t: float, row_chain: Sequence, col_chain: Sequence,
                           depth: int, chain_tol: float = 1e-8,
                           grid_tol: float = 1e-6) -> Tuple[np.ndarray, ResidualReport]:
        """
        Fill x[i, j] = (F x[i-1, j] + G x[i, j-1]) / t from a (lambda - A)-chain in the first
        column and a B-chain in the first row; cells are visited row-major.
        """
        A = as_matrix(A)
        n = A.shape[0]
        self._check_lift_time(t)
        if depth < 1:
            raise MatrixError(f"depth must be at least 1, got {depth}")
        if len(row_chain) < depth + 1 or len(col_chain) < depth + 1:
            raise PreconditionError(f"chains need {depth + 1} vectors, got {len(row_chain)} and {len(col_chain)}")
        rows = [as_vector(x, n, "row chain") for x in row_chain[:depth + 1]]
        cols = [as_vector(x, n, "column chain") for x in col_chain[:depth + 1]]
        corner = float(np.linalg.norm(rows[0] - cols[0]))
        if corner > chain_tol * max(np.linalg.norm(rows[0]), 1e-300):
            raise PreconditionError(f"chains do not share the corner x[0,0]: defect {corner:.3e}", defect=corner)

        ops = self.cauchy_ops(A, lam, t)
        L = lam * np.eye(n) - A
        self._check_chain(L, rows, "(lambda-A)", chain_tol)
        self._check_chain(ops.B, cols, "B", chain_tol)

        grid = np.zeros((depth + 1, depth + 1, n), dtype=complex)
        envelope = np.zeros((depth + 1, depth + 1))
        base = (opnorm(ops.F) + abs(ops.G_scalar)) / t
        for i in range(depth + 1):
            grid[i, 0] = rows[i]
            envelope[i, 0] = np.linalg.norm(rows[i])
        for j in range(depth + 1):
            grid[0, j] = cols[j]
            envelope[0, j] = np.linalg.norm(cols[j])
        for i in range(1, depth + 1):
            for j in range(1, depth + 1):
                grid[i, j] = (ops.F @ grid[i - 1, j] + ops.G_scalar * grid[i, j - 1]) / t
                envelope[i, j] = base * max(envelope[i - 1, j], envelope[i, j - 1])

        norms = np.linalg.norm(grid, axis=2)
        size = float(np.max(norms)) * (1.0 + opnorm(L) + opnorm(ops.B))
        E = self._gap_operator(A, lam, t)
        res_L = res_B = res_diag = 0.0
        for i in range(1, depth + 1):
            for j in range(1, depth + 1):
                res_L = max(res_L, float(np.linalg.norm(L @ grid[i, j] - grid[i - 1, j])))
                res_B = max(res_B, float(np.linalg.norm(ops.B @ grid[i, j] - grid[i, j - 1])))
            res_diag = max(res_diag, float(np.linalg.norm(E @ grid[i, i] - grid[i - 1, i - 1])))
        excess = float(np.max(norms - envelope * (1 + 1e-8)))

        growth = 0.0
        for i in range(depth + 1):
            for j in range(depth + 1):
                if i + j > 0 and norms[i, j] > 0:
                    growth = max(growth, float(norms[i, j] ** (1.0 / (i + j))))

        entries = [
            ResidualEntry.check("(l-A)x[i,j] = x[i-1,j]", res_L, size, grid_tol),
            ResidualEntry.check("B x[i,j] = x[i,j-1]", res_B, size, grid_tol),
            ResidualEntry.check("(e^{lt}-T(t))x[i,i] = x[i-1,i-1]", res_diag, size * (1.0 + opnorm(E)), grid_tol),
            ResidualEntry(identity="||x[i,j]|| <= ((||F||+|G|)/t)-envelope", residual=max(0.0, excess),
                          scale=float(np.max(envelope)), passed=excess <= 1e-300),
        ]
        report = ResidualReport(report="double_chain", instance=self._instance("A", lam, t), entries=entries,
                                extras={"growth": growth, "envelope_base": base, "depth": depth})
        return grid, report

    def lift_svep_chain(self, A, lam: complex, t: float, chain: Sequence,
                        chain_tol: float = 1e-8) -> Tuple[List[np.ndarray], ResidualReport]:
        """
        From x0 = 0, (e^{lt} - T(t)) x_i = x_{i-1} build y_i = B^i x_i with
        (lambda - A) y_i = y_{i-1}
        """
        A = as_matrix(A)
        n = A.shape[0]
        xs = [as_vector(x, n, "chain") for x in chain]
        if not xs or np.linalg.norm(xs[0]) > 0:
            raise PreconditionError("chain must start at x0 = 0")
        E = self._gap_operator(A, lam, t)
        self._check_chain(E, xs, "e^{lt}-T(t)", chain_tol)
        B = self.build_B(A, lam, t)
        L = lam * np.eye(n) - A
        normB = opnorm(B)

        ys = [np.linalg.matrix_power(B, i) @ x for i, x in enumerate(xs)]
        residual = max((float(np.linalg.norm(L @ ys[i] - ys[i - 1])) for i in range(1, len(ys))), default=0.0)
        size = max(float(np.linalg.norm(y)) for y in ys) * (1.0 + opnorm(L))
        excess = max(float(np.linalg.norm(y) - normB ** i * np.linalg.norm(x) * (1 + 1e-8))
                     for i, (x, y) in enumerate(zip(xs, ys)))
        entries = [
            ResidualEntry.check("(l-A)y_i = y_{i-1}", residual, size, self.identity_tol),
            ResidualEntry(identity="||y_i|| <= ||B||^i ||x_i||", residual=max(0.0, excess),
                          scale=1.0, passed=excess <= 1e-300),
        ]
        return ys, ResidualReport(report="lift_svep_chain", instance=self._instance("A", lam, t),
                                  entries=entries)

    def lift_resolvent_chain(self, A, lam: complex, t: float, x, chain: Sequence,
                             chain_tol: float = 1e-8) -> Tuple[List[np.ndarray], ResidualReport]:
        """
        From (e^{lt} - T(t)) x0 = x, (e^{lt} - T(t)) x_i = x_{i-1} build
        y_i = B^{i+1} x_i, a (lambda - A)-chain over x
        """
        A = as_matrix(A)
        n = A.shape[0]
        x = as_vector(x, n)
        xs = [as_vector(v, n, "chain") for v in chain]
        if not xs:
            raise PreconditionError("chain is empty")
        E = self._gap_operator(A, lam, t)
        self._check_chain(E, [x] + xs, "e^{lt}-T(t)", chain_tol)
        B = self.build_B(A, lam, t)
        L = lam * np.eye(n) - A

        ys = [np.linalg.matrix_power(B, i + 1) @ xi for i, xi in enumerate(xs)]
        previous = [x] + ys[:-1]
        residual = max(float(np.linalg.norm(L @ y - p)) for y, p in zip(ys, previous))
        size = max(float(np.linalg.norm(v)) for v in ys + [x]) * (1.0 + opnorm(L))
        entries = [ResidualEntry.check("(l-A)y_0 = x, (l-A)y_i = y_{i-1}", residual, size, self.identity_tol)]
        return ys, ResidualReport(report="lift_resolvent_chain", instance=self._instance("A", lam, t),
                                  entries=entries)
