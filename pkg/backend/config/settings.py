import os
from typing import Optional
from pydantic_settings import BaseSettings, SettingsConfigDict
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()


def _default_threads() -> int:
    return int(os.getenv("EMBEZZLEMETER_THREADS", str(os.cpu_count() or 1)))


class Settings(BaseSettings):
    # Parallelism
    threads: int = _default_threads()
    progress: bool = os.getenv("EMBEZZLEMETER_PROGRESS", "False").lower() == "true"

    # Numerical tolerances
    normalization_tolerance: float = float(os.getenv("EMBEZZLEMETER_NORMALIZATION_TOL", "1e-12"))
    compensated_threshold: int = int(os.getenv("EMBEZZLEMETER_COMPENSATED_THRESHOLD", "100000"))
    stream_chunk: int = int(os.getenv("EMBEZZLEMETER_STREAM_CHUNK", "1048576"))
    quad_tol: float = float(os.getenv("EMBEZZLEMETER_QUAD_TOL", "1e-10"))

    # Purified optimizer
    purified_max_iter: int = int(os.getenv("EMBEZZLEMETER_PURIFIED_MAX_ITER", "100000"))
    purified_tol: float = float(os.getenv("EMBEZZLEMETER_PURIFIED_TOL", "1e-9"))
    purified_solver: Optional[str] = os.getenv("EMBEZZLEMETER_PURIFIED_SOLVER")

    # Oracles
    grid_resolution_dim2: int = int(os.getenv("EMBEZZLEMETER_GRID_RESOLUTION_DIM2", "1000"))
    grid_resolution_dim3: int = int(os.getenv("EMBEZZLEMETER_GRID_RESOLUTION_DIM3", "300"))
    fidelity_grid_resolution: int = int(os.getenv("EMBEZZLEMETER_FIDELITY_GRID_RESOLUTION", "2000"))
    fidelity_refine_levels: int = int(os.getenv("EMBEZZLEMETER_FIDELITY_REFINE_LEVELS", "4"))

    # Application Configuration
    app_host: str = os.getenv("APP_HOST", "0.0.0.0")
    app_port: int = int(os.getenv("APP_PORT", "8000"))
    debug: bool = os.getenv("DEBUG", "False").lower() == "true"
    log_level: str = os.getenv("EMBEZZLEMETER_LOG_LEVEL", os.getenv("LOG_LEVEL", "INFO"))

    @property
    def worker_count(self) -> int:
        return max(1, self.threads)

    def grid_resolution(self, dim: int) -> int:
        return self.grid_resolution_dim2 if dim <= 2 else self.grid_resolution_dim3

    model_config = SettingsConfigDict(env_file=".env", extra="allow")


settings = Settings()
