import os
import json

from dotenv import load_dotenv
from pydantic import BaseModel, Field

load_dotenv()


class GlobalConfiguration:
    @staticmethod
    def get_threads() -> int:
        threads = os.environ.get("PRC_THREADS")
        if threads:
            return max(1, int(threads))
        return os.cpu_count() or 1

    @staticmethod
    def get_logging_env() -> str:
        return os.environ.get("LOGCONFIG", "dev")

    @staticmethod
    def get_disabled_info_logs_scopes() -> list:
        return json.loads(os.environ.get("PRC_DISABLE_INFO_LOGS_SCOPES", "[]"))


class ModeControls(BaseModel):
    """Controls for the Newton solver of the random effects mode."""

    tol: float = Field(default=1e-8, gt=0)
    max_iter: int = Field(default=100, ge=1)
    log_sigma2_floor: float = -30.0
    max_halvings: int = Field(default=30, ge=0)


class FitControls(BaseModel):
    """Controls for the EM fit."""

    tol: float = Field(default=1e-8, gt=0)
    step_tol: float = Field(default=1e-6, gt=0)
    max_em_iterations: int = Field(default=200, ge=1)
    # Each EM iteration adds a profile Newton step once relative progress drops below
    # accelerate_below or after newton_after iterations, whichever comes first.
    accelerate_below: float = Field(default=1e-4, ge=0)
    newton_after: int = Field(default=10, ge=0)
    m_step_tol: float = Field(default=1e-6, gt=0)
    max_newton_steps: int = Field(default=50, ge=1)
    max_halvings: int = Field(default=30, ge=0)
    fixed_log_sigma2: float | None = None
    boundary: float = Field(default=50.0, gt=0)
    mode: ModeControls = ModeControls()


class SamplerControls(BaseModel):
    proposals: int = Field(default=2000, ge=1)
    resamples: int = Field(default=200, ge=1)
    seed: int = 0


class PrcControls(BaseModel):
    mc_draws: int = Field(default=100_000, ge=1)
    alpha: float = Field(default=0.001, gt=0, lt=1)
    seed: int = 0
