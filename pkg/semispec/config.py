"""
Configuration settings for the semigroup local-spectral laboratory
"""
import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()


class Settings:
    # Output
    OUT_DIR = os.getenv("SEMISPEC_OUT_DIR", "./reports")
    LOG_LEVEL = os.getenv("SEMISPEC_LOG_LEVEL", "INFO")

    # Sweep settings
    MAX_WORKERS = int(os.getenv("SEMISPEC_MAX_WORKERS", "4"))
    SHOW_PROGRESS = os.getenv("SEMISPEC_PROGRESS", "0") == "1"
    SEED = int(os.getenv("SEMISPEC_SEED", "20240611"))
    RNG_ALGORITHM = "PCG64"

    # Tolerances
    CLUSTER_TOL_REL = 1e-6   # eigenvalue clustering, relative to ||A||
    RANK_TOL = 1e-10         # singular value cutoff, relative to sigma_max
    CONTAIN_TOL = 1e-7       # subspace containment residual
    MEMBERSHIP_TOL = 1e-10   # ||P_k x|| / ||x|| threshold for local spectra
    IDENTITY_TOL = 1e-8
    POWER_TOL = 1e-7
    AXIS_TOL = 1e-9          # distance to iR or the unit circle
    QUAD_ATOL = 1e-10
    CHAIN_DEPTH = 40
    MAX_RETRIES = 2

    def tolerances(self) -> dict:
        """Tolerance table recorded in run manifests"""
        return {
            "cluster_tol_rel": self.CLUSTER_TOL_REL,
            "rank_tol": self.RANK_TOL,
            "contain_tol": self.CONTAIN_TOL,
            "membership_tol": self.MEMBERSHIP_TOL,
            "identity_tol": self.IDENTITY_TOL,
            "power_tol": self.POWER_TOL,
            "axis_tol": self.AXIS_TOL,
            "quad_atol": self.QUAD_ATOL,
        }


settings = Settings()
