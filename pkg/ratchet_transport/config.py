"""Defaults table and environment settings."""

import logging
import os
from typing import Optional

from dotenv import load_dotenv

load_dotenv()

# Every default used by the command-line front-end lives here.
DEFAULTS = {
    "n_points": 1024,        # quadrature / grid size (power of two)
    "dt": 1e-3,              # evolution time step
    "theta": 1.0,            # 1 = backward Euler, 0.5 = trapezoidal
    "tol": 1e-8,             # relaxation tolerance (L1 change per unit time)
    "max_steps": 100_000,    # relaxation step cap
    "sample_every": 100,     # snapshot interval in steps
    "t_end": 500.0,          # orbit length
    "orbit_dt": 0.05,        # orbit step
    "burn_in": 0.1,          # regression burn-in fraction
    "K": 4,                  # series terms in the resistance fit
    "recover_sigma_min": 8.0,
    "recover_sigma_max": 512.0,
    "recover_sigma_count": 12,
    "gs_terms": 12,          # Gaver-Stehfest terms
}

LOG_FORMAT = "[%(asctime)s] {%(name)s:%(funcName)s:%(lineno)d} %(levelname)s - %(message)s"


class Settings:
    """Process-level settings read from the environment (or a local .env file)."""

    def __init__(self, threads: Optional[int] = None, log_level: Optional[str] = None):
        raw_threads = threads if threads is not None else os.getenv("RT_THREADS", "1")
        try:
            self.threads = int(raw_threads)
        except (TypeError, ValueError):
            raise ValueError(f"RT_THREADS must be an integer, got {raw_threads!r}")
        if self.threads < 1:
            raise ValueError("thread count must be at least 1")
        self.log_level = (log_level or os.getenv("RT_LOG_LEVEL", "WARNING")).upper()

    def configure_logging(self) -> None:
        logging.basicConfig(level=self.log_level, format=LOG_FORMAT, force=True)
