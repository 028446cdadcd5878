"""
Services package for semispec
"""
from .linalg_service import LinalgService, opnorm
from .semigroup_service import SemigroupService
from .cauchy_service import CauchyService
from .local_spectral_service import LocalSpectralService
from .stability_service import StabilityService
from .zoo_service import ZooService
from .storage_service import StorageService

__all__ = [
    'LinalgService', 'opnorm', 'SemigroupService', 'CauchyService', 'LocalSpectralService',
    'StabilityService', 'ZooService', 'StorageService',
]
