"""
Pydantic models for semispec
"""
from enum import Enum
from typing import Any, Dict, List, Literal, Optional

import numpy as np
from pydantic import (
    BaseModel, ConfigDict, Field, SerializeAsAny, computed_field, field_serializer, field_validator,
)

from .errors import MatrixError


def as_matrix(A, name: str = "A") -> np.ndarray:
    """Coerce to a square, finite complex128 matrix"""
    M = np.asarray(A, dtype=complex)
    if M.ndim == 0:
        M = M.reshape(1, 1)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] == 0:
        raise MatrixError(f"{name} must be a non-empty square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise MatrixError(f"{name} has non-finite entries")
    return M


def as_vector(x, dim: int, name: str = "x") -> np.ndarray:
    """Coerce to a finite complex128 vector of length dim"""
    v = np.asarray(x, dtype=complex).reshape(-1)
    if v.shape[0] != dim:
        raise MatrixError(f"{name} has length {v.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(v)):
        raise MatrixError(f"{name} has non-finite entries")
    return v


class ArrayModel(BaseModel):
    """Base for frozen models that carry numpy arrays"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


class GeneratorSpec(ArrayModel):
    """Infinitesimal generator of a matrix semigroup"""
    name: str
    A: np.ndarray
    description: str = ""

    @field_validator("A", mode="before")
    @classmethod
    def _square(cls, value):
        return as_matrix(value, "generator matrix")

    @property
    def dim(self) -> int:
        return self.A.shape[0]


class SpectralCluster(ArrayModel):
    eigenvalue: complex
    multiplicity: int = Field(ge=1)
    projection: np.ndarray


class SpectralDecomposition(ArrayModel):
    """Eigenvalue clusters with their Riesz projections"""
    clusters: List[SpectralCluster]
    cluster_tol: float = Field(ge=0)

    @property
    def eigenvalues(self) -> List[complex]:
        return [c.eigenvalue for c in self.clusters]

    @property
    def dim(self) -> int:
        return sum(c.multiplicity for c in self.clusters)


class Subspace(ArrayModel):
    """Orthonormal basis of a subspace of C^n"""
    ambient_dim: int = Field(ge=1)
    basis: np.ndarray
    rank_tol: float = Field(ge=0)

    @field_validator("basis", mode="before")
    @classmethod
    def _columns(cls, value):
        Q = np.asarray(value, dtype=complex)
        if Q.ndim == 1:
            Q = Q.reshape(-1, 1)
        return Q

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def is_zero(self) -> bool:
        return self.dim == 0


class GrowthBound(BaseModel):
    M: float = Field(ge=1.0)
    omega: float


class Route(str, Enum):
    BLOCK_EXP = "blockExp"
    RESOLVENT = "resolventForm"
    QUADRATURE = "quadrature"


class CauchyOps(ArrayModel):
    """B_lambda(t), F_lambda(t) and the scalar of G_lambda(t)"""
    lam: complex
    t: float = Field(ge=0)
    B: np.ndarray
    F: np.ndarray
    G_scalar: complex
    method: Route


class ChainVerdict(str, Enum):
    CONVERGENT = "convergent"
    DIVERGENT = "divergent"
    INCONSISTENT = "inconsistent"


class ChainReport(ArrayModel):
    mu: complex
    x: np.ndarray
    chain: List[np.ndarray]
    step_norms: List[float]
    growth_estimate: float
    verdict: ChainVerdict
    failing_index: Optional[int] = None


class LocalSpectrumReport(ArrayModel):
    x: np.ndarray
    points: List[complex]
    weights: List[float]
    membership_tol: float


class CoreReport(ArrayModel):
    K: Subspace
    C: Subspace
    hyper_range: Subspace


class SvepScanReport(BaseModel):
    grid: List[complex]
    members: List[complex]
    intersection_dims: List[int]
    shadow_growth: List[float]

    @field_serializer("grid", "members")
    def _pairs(self, values):
        return [[z.real, z.imag] for z in values]


class Instance(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    generator: str
    lambda_: Optional[List[float]] = Field(default=None, alias="lambda")
    t: Optional[float] = None


class ResidualEntry(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    identity: str
    residual: float
    scale: float
    passed: bool = Field(alias="pass")

    @classmethod
    def check(cls, identity: str, residual: float, scale: float, tol: float,
              floor: float = 1e-14) -> "ResidualEntry":
        """Pass iff residual <= tol * scale + floor"""
        residual = float(residual)
        scale = float(scale)
        passed = bool(np.isfinite(residual) and residual <= tol * scale + floor)
        return cls(identity=identity, residual=residual, scale=scale, passed=passed)


class ResidualReport(BaseModel):
    """Residuals of one verifier run"""
    report: str
    instance: Instance
    entries: List[ResidualEntry]
    extras: Dict[str, Any] = Field(default_factory=dict)

    @computed_field
    @property
    def all_passed(self) -> bool:
        return all(e.passed for e in self.entries)


class TheoremReport(BaseModel):
    """Set or subspace inclusion check"""
    theorem: str
    instance: Instance
    lhs: List[Any]
    rhs: List[Any]
    included: bool
    witnesses: List[str] = Field(default_factory=list)


class StabilityVerdict(BaseModel):
    mode: Literal["strong", "uniform"]
    status: Literal["stable", "not-stable", "hypothesis-not-met"]
    hypothesis_met: bool
    criterion_holds: bool
    criterion_evidence: Dict[str, Any]
    simulation_agrees: bool
    decay_rate: Optional[float] = None


class ZooEntry(BaseModel):
    name: str
    params: Dict[str, Any] = Field(default_factory=dict)
    expected_spectrum: Optional[List[complex]] = None
    stability_class: Literal["uniformly-stable", "bounded", "unbounded"]

    @field_serializer("expected_spectrum")
    def _pairs(self, values):
        if values is None:
            return None
        return [[z.real, z.imag] for z in values]


class RunConfig(BaseModel):
    """Validated command-line configuration"""
    command: str
    gen: str
    lam: complex = 0j
    t: float = 1.0
    t0: float = 1.0
    t_max: Optional[float] = None
    n_max: int = 4
    samples: int = 8
    depth: int = 40
    seed: int = 0
    mode: Literal["strong", "uniform"] = "strong"
    x: Optional[List[complex]] = None
    mu_grid: List[complex] = Field(default_factory=list)
    out_dir: str = "."
    tolerances: Dict[str, float] = Field(default_factory=dict)

    @field_validator("t", "t0")
    @classmethod
    def _nonnegative(cls, value, info):
        if value < 0:
            raise ValueError(f"{info.field_name} must be nonnegative")
        return value

    @field_validator("t_max")
    @classmethod
    def _positive_horizon(cls, value):
        if value is not None and value <= 0:
            raise ValueError("t-max must be positive")
        return value

    @field_validator("samples")
    @classmethod
    def _at_least_one(cls, value):
        if value < 1:
            raise ValueError("need ≥1 sample")
        return value

    @field_validator("n_max")
    @classmethod
    def _power_range(cls, value):
        if not 1 <= value <= 6:
            raise ValueError("n-max must lie in 1..6")
        return value

    @field_validator("depth")
    @classmethod
    def _chain_depth(cls, value):
        if value < 8:
            raise ValueError("depth must be at least 8")
        return value

    @field_validator("tolerances")
    @classmethod
    def _positive_tolerances(cls, value):
        for key, tol in value.items():
            if not tol > 0:
                raise ValueError(f"tolerance {key} must be positive")
        return value

    @field_serializer("lam")
    def _pair(self, value):
        return [value.real, value.imag]

    @field_serializer("x", "mu_grid")
    def _pairs(self, values):
        if values is None:
            return None
        return [[z.real, z.imag] for z in values]


class RunManifest(BaseModel):
    command: str
    seed: int
    rng: str
    tolerances: Dict[str, float]
    versions: Dict[str, str]
    config: Dict[str, Any] = Field(default_factory=dict)
    created_at: str


class ReportBundle(BaseModel):
    """Everything one command run writes to its JSON report"""
    command: str
    generator: str
    passed: bool
    reports: List[SerializeAsAny[BaseModel]] = Field(default_factory=list)


class ChainSummary(BaseModel):
    """JSON view of a resolvent chain"""
    mu: List[float]
    verdict: ChainVerdict
    growth_estimate: Optional[float]
    expected_growth: Optional[float]
    failing_index: Optional[int] = None
    step_norms: List[float]
    agrees_with_projections: bool


class LocalSpectrumSummary(BaseModel):
    x: List[List[float]]
    points: List[List[float]]
    weights: List[float]
    chains: List[ChainSummary] = Field(default_factory=list)
