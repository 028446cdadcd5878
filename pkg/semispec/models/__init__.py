"""
Models package for semispec
"""
from .schemas import (
    GeneratorSpec, SpectralCluster, SpectralDecomposition, Subspace, GrowthBound,
    CauchyOps, Route, ChainReport, ChainVerdict, LocalSpectrumReport, CoreReport,
    SvepScanReport, ResidualEntry, ResidualReport, Instance, TheoremReport,
    StabilityVerdict, ZooEntry, RunConfig, RunManifest, ReportBundle, ChainSummary,
    LocalSpectrumSummary, as_matrix, as_vector,
)
from .errors import (
    SemispecError, MatrixError, EigenDecompositionError, ExpmOverflowError,
    NearSingularError, PreconditionError, GeneratorFormatError, SchemaError, ConfigError,
)

__all__ = [
    'GeneratorSpec', 'SpectralCluster', 'SpectralDecomposition', 'Subspace', 'GrowthBound',
    'CauchyOps', 'Route', 'ChainReport', 'ChainVerdict', 'LocalSpectrumReport', 'CoreReport',
    'SvepScanReport', 'ResidualEntry', 'ResidualReport', 'Instance', 'TheoremReport',
    'StabilityVerdict', 'ZooEntry', 'RunConfig', 'RunManifest', 'ReportBundle', 'ChainSummary',
    'LocalSpectrumSummary', 'as_matrix', 'as_vector',
    'SemispecError', 'MatrixError', 'EigenDecompositionError', 'ExpmOverflowError',
    'NearSingularError', 'PreconditionError', 'GeneratorFormatError', 'SchemaError',
    'ConfigError',
]
