"""
Built-in generator zoo with machine-checkable expected facts
"""
import logging
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import scipy.linalg

from ..config import settings
from ..models.errors import ConfigError
from ..models.schemas import GeneratorSpec, Instance, ResidualEntry, ResidualReport, ZooEntry
from ..utils.format_utils import parse_complex_list
from .linalg_service import LinalgService, opnorm
from .stability_service import StabilityService

logger = logging.getLogger(__name__)

SPECTRUM_TOL = 1e-8

ALIASES = {"diag": "diagonal"}


def _int_param(params: Dict[str, Any], key: str, default: int, minimum: int = 1) -> int:
    value = params.get(key, default)
    try:
        real = float(np.real(value))
        value = int(real) if np.imag(value) == 0 and real.is_integer() else None
    except (TypeError, ValueError):
        value = None
    if value is None or value < minimum:
        raise ConfigError(f"parameter {key} must be an integer >= {minimum}, got {params.get(key)!r}")
    return value


def _diagonal(params):
    eigs = [complex(z) for z in params.get("eigenvalues", [-1.0, -2.0])]
    if not eigs:
        raise ConfigError("diagonal needs at least one eigenvalue")
    return np.diag(np.array(eigs, dtype=complex)), eigs


def _jordan(params):
    dim = _int_param(params, "dim", 2)
    eig = complex(params.get("eig", 0.0))
    A = eig * np.eye(dim, dtype=complex) + np.diag(np.ones(dim - 1), 1)
    return A, [eig] * dim


def _nilpotent_shift(params):
    n = _int_param(params, "n", 4)
    weights = 1.0 / np.arange(1, n)
    return np.diag(weights, 1).astype(complex), [0j] * n


def _rotation(params):
    omega = float(np.real(params.get("omega", 1.0)))
    return np.array([[0.0, -omega], [omega, 0.0]], dtype=complex), [1j * omega, -1j * omega]


def _alias_pair(params):
    return np.diag([0.0, 2j * np.pi]), [0j, 2j * np.pi]


def _truncated_left_shift(params):
    n = _int_param(params, "n", 4)
    return np.diag(np.ones(n - 1), 1).astype(complex), [0j] * n


def _heat1d(params):
    n = _int_param(params, "n", 4)
    h2 = (n + 1) ** 2
    A = h2 * (np.diag(-2.0 * np.ones(n)) + np.diag(np.ones(n - 1), 1) + np.diag(np.ones(n - 1), -1))
    k = np.arange(1, n + 1)
    eigs = -2.0 * h2 * (1.0 - np.cos(k * np.pi / (n + 1)))
    return A.astype(complex), [complex(z) for z in eigs]


def _transport1d(params):
    n = _int_param(params, "n", 8, minimum=2)
    # periodic upwind difference: (Ax)_k = n (x_{k+1} - x_k)
    S = np.roll(np.eye(n), 1, axis=1)
    A = n * (S - np.eye(n))
    k = np.arange(n)
    eigs = n * (np.exp(2j * np.pi * k / n) - 1.0)
    return A.astype(complex), [complex(z) for z in eigs]


def _random_stable(params):
    n = _int_param(params, "n", 5)
    seed = _int_param(params, "seed", settings.SEED, minimum=0)
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((n, n))
    abscissa = float(np.max(scipy.linalg.eigvals(G).real))
    return (G - (abscissa + 1.0) * np.eye(n)).astype(complex), None


def _random_non_normal(params):
    n = _int_param(params, "n", 5)
    seed = _int_param(params, "seed", settings.SEED, minimum=0)
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    U = np.triu(rng.standard_normal((n, n)), 1) + np.diag(-np.arange(1.0, n + 1))
    return (Q @ U @ Q.T).astype(complex), [complex(-k) for k in range(1, n + 1)]


BUILDERS: Dict[str, Callable] = {
    "diagonal": _diagonal,
    "jordan": _jordan,
    "nilpotentShift": _nilpotent_shift,
    "rotation": _rotation,
    "aliasPair": _alias_pair,
    "truncatedLeftShift": _truncated_left_shift,
    "heat1d": _heat1d,
    "transport1d": _transport1d,
    "randomStable": _random_stable,
    "randomNonNormal": _random_non_normal,
}

# positional names for `name:a,b,...` tokens
POSITIONAL = {
    "diagonal": None,
    "jordan": ("dim", "eig"),
    "nilpotentShift": ("n",),
    "rotation": ("omega",),
    "aliasPair": (),
    "truncatedLeftShift": ("n",),
    "heat1d": ("n",),
    "transport1d": ("n",),
    "randomStable": ("n", "seed"),
    "randomNonNormal": ("n", "seed"),
}

DESCRIPTIONS = {
    "diagonal": "diagonal generator",
    "jordan": "single Jordan block",
    "nilpotentShift": "weighted upper shift with weights 1/k",
    "rotation": "planar rotation generator",
    "aliasPair": "diag(0, 2 pi i): exponential aliasing at t = 1",
    "truncatedLeftShift": "unweighted upper shift, finite section of the left shift",
    "heat1d": "Dirichlet second difference scaled by (n+1)^2",
    "transport1d": "periodic upwind first difference",
    "randomStable": "Gaussian matrix shifted to spectral abscissa -1",
    "randomNonNormal": "orthogonally rotated upper triangular matrix with eigenvalues -1..-n",
}


class ZooService:
    def __init__(self, linalg: LinalgService, stability: StabilityService):
        self.linalg = linalg
        self.stability = stability

    def _build(self, name: str, params: Optional[Dict[str, Any]]) -> Tuple[GeneratorSpec, Optional[List[complex]]]:
        name = ALIASES.get(name, name)
        if name not in BUILDERS:
            raise ConfigError(f"unknown generator {name!r}; choose from {', '.join(BUILDERS)}")
        A, expected = BUILDERS[name](dict(params or {}))
        return GeneratorSpec(name=name, A=A, description=DESCRIPTIONS[name]), expected

    def builtin(self, name: str, params: Optional[Dict[str, Any]] = None) -> GeneratorSpec:
        return self._build(name, params)[0]

    def parse_token(self, text: str) -> Tuple[str, Dict[str, Any]]:
        """`name` or `name:a,b,...` with positional re[:im] arguments"""
        name, _, args = text.partition(":")
        name = ALIASES.get(name.strip(), name.strip())
        if name not in BUILDERS:
            raise ConfigError(f"unknown generator {name!r}; choose from {', '.join(BUILDERS)}")
        values = parse_complex_list(args)
        keys = POSITIONAL[name]
        if keys is None:
            return name, ({"eigenvalues": [v.real if v.imag == 0 else v for v in values]} if values else {})
        if len(values) > len(keys):
            raise ConfigError(f"{name} takes at most {len(keys)} arguments ({', '.join(keys) or 'none'}), "
                              f"got {len(values)}")
        return name, {key: (v.real if v.imag == 0 else v) for key, v in zip(keys, values)}

    def from_token(self, text: str) -> GeneratorSpec:
        name, params = self.parse_token(text)
        return self.builtin(name, params)

    def _entry(self, name: str, params: Dict[str, Any]) -> ZooEntry:
        spec, expected = self._build(name, params)
        return ZooEntry(name=name, params=params, expected_spectrum=expected,
                        stability_class=self._expected_class(name, params, spec, expected))

    def _expected_class(self, name, params, spec, expected) -> str:
        if name in ("randomStable", "randomNonNormal", "heat1d"):
            return "uniformly-stable"
        if name in ("nilpotentShift", "truncatedLeftShift"):
            return "unbounded" if spec.dim > 1 else "bounded"
        if name == "jordan":
            eig = expected[0]
            if eig.real < 0:
                return "uniformly-stable"
            return "bounded" if eig.real == 0 and spec.dim == 1 else "unbounded"
        # semisimple spectrum: the abscissa decides
        top = max(z.real for z in expected)
        if top < 0:
            return "uniformly-stable"
        return "bounded" if top == 0 else "unbounded"

    def zoo_entries(self) -> List[ZooEntry]:
        """The default builtin corpus"""
        defaults = [
            ("diagonal", {"eigenvalues": [-1.0, -2.0]}),
            ("jordan", {"dim": 2, "eig": 0.0}),
            ("nilpotentShift", {"n": 4}),
            ("rotation", {"omega": 1.0}),
            ("aliasPair", {}),
            ("truncatedLeftShift", {"n": 4}),
            ("heat1d", {"n": 4}),
            ("transport1d", {"n": 8}),
            ("randomStable", {"n": 5, "seed": settings.SEED}),
            ("randomNonNormal", {"n": 5, "seed": settings.SEED}),
        ]
        return [self._entry(name, params) for name, params in defaults]

    def _spectrum_defect(self, A: np.ndarray, expected: List[complex]) -> float:
        """Greedy nearest matching of the expected multiset against computed eigenvalues"""
        computed = list(self.linalg.eigenvalues(A))
        if len(computed) != len(expected):
            return float("inf")
        worst = 0.0
        for z in expected:
            dists = [abs(w - z) for w in computed]
            k = int(np.argmin(dists))
            worst = max(worst, dists[k])
            computed.pop(k)
        return worst

    def check_entry(self, entry: ZooEntry) -> ResidualReport:
        spec, _ = self._build(entry.name, entry.params)
        again, _ = self._build(entry.name, entry.params)
        scale = max(1.0, opnorm(spec.A))
        entries = [ResidualEntry(identity="builder is deterministic", residual=opnorm(spec.A - again.A),
                                 scale=1.0, passed=bool(np.array_equal(spec.A, again.A)))]
        if entry.expected_spectrum is not None:
            defect = self._spectrum_defect(spec.A, list(entry.expected_spectrum))
            entries.append(ResidualEntry.check("spectrum", defect, scale, SPECTRUM_TOL))

        decomp = self.linalg.eig_decompose(spec.A)
        defects = self.linalg.decomposition_defects(spec.A, decomp)
        entries.append(ResidualEntry.check("sum of projections = I", defects["sum_to_identity"],
                                           spec.dim, SPECTRUM_TOL))

        actual = self.stability.stability_class(spec)
        entries.append(ResidualEntry(identity=f"stability class {entry.stability_class}",
                                     residual=0.0 if actual == entry.stability_class else 1.0,
                                     scale=1.0, passed=actual == entry.stability_class))
        report = ResidualReport(report="zoo_entry", instance=Instance(generator=entry.name), entries=entries,
                                extras={"computed_class": actual})
        if not report.all_passed:
            logger.error(f"zoo entry {entry.name} failed: "
                         f"{[e.identity for e in entries if not e.passed]}")
        return report
