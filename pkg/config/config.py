"""
Application configuration settings.
"""

import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()


class Config:
    # Application Settings
    DEBUG = os.getenv("DEBUG", "False").lower() == "true"
    LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")

    # Randomness
    DEFAULT_SEED = int(os.getenv("SGLV_SEED", "20240101"))

    # Simulation
    FINE_DT = float(os.getenv("SGLV_FINE_DT", "0.01"))

    # Numerical tolerances
    PSD_TOLERANCE = float(os.getenv("SGLV_PSD_TOL", "1e-10"))
    A4_LOWER_BOUND = float(os.getenv("SGLV_A4_EPS", "1e-8"))
    SINGULAR_TOLERANCE = float(os.getenv("SGLV_SINGULAR_TOL", "1e-12"))

    # Estimation / experiments
    DEFAULT_PSEUDOCOUNT = float(os.getenv("SGLV_PSEUDOCOUNT", "0.5"))
    BOOTSTRAP_REPLICATES = int(os.getenv("SGLV_BOOTSTRAP_B", "1000"))
    MC_REPLICATES = int(os.getenv("SGLV_MC_REPLICATES", "200"))
    JOBS = int(os.getenv("SGLV_JOBS", "1"))

    # Storage
    OUTPUT_DIR = os.getenv("SGLV_OUTPUT_DIR", "./data/runs")

    @classmethod
    def validate(cls):
        """Validate configuration settings."""
        if cls.FINE_DT <= 0:
            raise ValueError("SGLV_FINE_DT must be positive.")
        if cls.PSD_TOLERANCE < 0:
            raise ValueError("SGLV_PSD_TOL must be non-negative.")
        if not 0 < cls.A4_LOWER_BOUND < 1:
            raise ValueError("SGLV_A4_EPS must lie in (0, 1).")
        if cls.SINGULAR_TOLERANCE <= 0:
            raise ValueError("SGLV_SINGULAR_TOL must be positive.")
        if cls.DEFAULT_PSEUDOCOUNT < 0:
            raise ValueError("SGLV_PSEUDOCOUNT must be non-negative.")
        if cls.BOOTSTRAP_REPLICATES < 100:
            raise ValueError("SGLV_BOOTSTRAP_B must be at least 100.")
        if cls.MC_REPLICATES < 1:
            raise ValueError("SGLV_MC_REPLICATES must be at least 1.")
        if cls.JOBS < 1:
            raise ValueError("SGLV_JOBS must be at least 1.")
        if not 0 <= cls.DEFAULT_SEED < 2**64:
            raise ValueError("SGLV_SEED must be an unsigned 64-bit integer.")
