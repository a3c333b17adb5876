import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv

from errors import ConfigError

# Load environment variables
load_dotenv()

class Config:
    # Solver backends
    SOLVER_BACKEND = os.getenv("OPF_SOLVER_BACKEND", "cvxpy")
    CVXPY_SOLVER = os.getenv("OPF_CVXPY_SOLVER", "CLARABEL")

    # Power flow / linearization
    NEWTON_TOL = float(os.getenv("OPF_NEWTON_TOL", "1e-8"))
    NEWTON_MAX_ITER = int(os.getenv("OPF_NEWTON_MAX_ITER", "50"))
    SLA_ROUNDS = int(os.getenv("OPF_SLA_ROUNDS", "3"))

    # Formulation
    POLYGON_SEGMENTS = int(os.getenv("OPF_POLYGON_SEGMENTS", "8"))
    ENVELOPE_SEGMENTS = int(os.getenv("OPF_ENVELOPE_SEGMENTS", "4"))

    # Branch and bound
    MIP_GAP = float(os.getenv("OPF_MIP_GAP", "1e-6"))
    NODE_LIMIT = int(os.getenv("OPF_NODE_LIMIT", "20000"))
    CONE_SLACK_TOL = float(os.getenv("OPF_CONE_SLACK_TOL", "1e-4"))

    # Benders decomposition
    GBD_RESIDUAL = float(os.getenv("OPF_GBD_RESIDUAL", "1e-5"))
    # 0 leaves the residual rule as the only stop
    GBD_GAP = float(os.getenv("OPF_GBD_GAP", "0"))
    GBD_MAX_ITER = int(os.getenv("OPF_GBD_MAX_ITER", "150"))

    # Parallelism and sampling
    WORKERS = int(os.getenv("OPF_WORKERS", "4"))
    SAMPLES = int(os.getenv("OPF_SAMPLES", "100"))
    SEED = int(os.getenv("OPF_SEED", "2024"))

    # Output
    OUTPUT_DIR = os.getenv("OPF_OUTPUT_DIR", "results")

    # Logging Configuration
    LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
    LOG_FILE = os.getenv("OPF_LOG_FILE", "logs/opf.log")

    BACKENDS = ("cvxpy", "reference")

    @classmethod
    def validate(cls):
        """Validate that all configuration values are usable"""
        problems = []
        if cls.SOLVER_BACKEND not in cls.BACKENDS:
            problems.append(f"OPF_SOLVER_BACKEND must be one of {', '.join(cls.BACKENDS)}")
        if cls.NEWTON_TOL <= 0:
            problems.append("OPF_NEWTON_TOL must be positive")
        if cls.NEWTON_MAX_ITER < 1:
            problems.append("OPF_NEWTON_MAX_ITER must be at least 1")
        if cls.SLA_ROUNDS < 0:
            problems.append("OPF_SLA_ROUNDS must be non-negative")
        if cls.POLYGON_SEGMENTS < 1:
            problems.append("OPF_POLYGON_SEGMENTS must be at least 1")
        if cls.ENVELOPE_SEGMENTS < 1:
            problems.append("OPF_ENVELOPE_SEGMENTS must be at least 1")
        if not 0 <= cls.MIP_GAP < 1:
            problems.append("OPF_MIP_GAP must lie in [0, 1)")
        if cls.NODE_LIMIT < 1:
            problems.append("OPF_NODE_LIMIT must be at least 1")
        if cls.GBD_RESIDUAL <= 0 or cls.GBD_GAP < 0:
            problems.append("OPF_GBD_RESIDUAL must be positive and OPF_GBD_GAP non-negative")
        if cls.GBD_MAX_ITER < 1:
            problems.append("OPF_GBD_MAX_ITER must be at least 1")
        if cls.WORKERS < 1:
            problems.append("OPF_WORKERS must be at least 1")

        if problems:
            raise ValueError(f"Invalid configuration: {'; '.join(problems)}")

        return True


@dataclass
class RunConfig:
    """Validated merge of command-line flags over Config defaults"""
    command: str
    case: str = "fig4"
    mode: str = "eropf"
    path: str = "centralized"
    cut: str = "multi"
    asynchronous: bool = False
    situation: Optional[int] = None
    n_min: Optional[int] = None
    staleness: int = 3
    latencies: Optional[List[float]] = None
    jitter: float = 0.0
    seed: int = field(default_factory=lambda: Config.SEED)
    samples: int = field(default_factory=lambda: Config.SAMPLES)
    rounds: int = field(default_factory=lambda: Config.SLA_ROUNDS)
    segments: int = field(default_factory=lambda: Config.POLYGON_SEGMENTS)
    envelope: int = field(default_factory=lambda: Config.ENVELOPE_SEGMENTS)
    switching: bool = True
    res_limit: str = "cap"
    backend: str = field(default_factory=lambda: Config.SOLVER_BACKEND)
    output: str = field(default_factory=lambda: Config.OUTPUT_DIR)
    decisions: Optional[str] = None
    residual_tol: float = field(default_factory=lambda: Config.GBD_RESIDUAL)
    gap_tol: float = field(default_factory=lambda: Config.GBD_GAP)
    max_iter: int = field(default_factory=lambda: Config.GBD_MAX_ITER)
    node_log: bool = False
    enumerate: bool = False

    MODES = ("dopf", "ropf", "eropf")
    PATHS = ("centralized", "gbd")
    CUTS = ("single", "multi")
    RES_LIMITS = ("cap", "ratio", "rated")

    @property
    def output_dir(self) -> Path:
        return Path(self.output)

    @property
    def delayed(self) -> bool:
        """Any asynchronous communication option was given"""
        return self.asynchronous or self.situation is not None or self.n_min is not None or self.latencies is not None

    def validate(self) -> "RunConfig":
        problems = []
        if self.mode not in self.MODES:
            problems.append(f"mode must be one of {', '.join(self.MODES)}")
        if self.path not in self.PATHS:
            problems.append(f"path must be one of {', '.join(self.PATHS)}")
        if self.cut not in self.CUTS:
            problems.append(f"cut must be one of {', '.join(self.CUTS)}")
        if self.res_limit not in self.RES_LIMITS:
            problems.append(f"res-limit must be one of {', '.join(self.RES_LIMITS)}")
        if self.delayed and self.path != "gbd":
            problems.append("asynchronous options require the gbd path")
        if self.delayed and self.cut == "single":
            problems.append("single-cut GBD runs synchronously only")
        if self.path == "gbd" and self.mode == "ropf":
            problems.append("ROPF cannot be decomposed; use eropf with the gbd path")
        if self.situation is not None and self.situation not in (1, 2, 3):
            problems.append("situation must be 1, 2 or 3")
        if self.n_min is not None and self.n_min < 1:
            problems.append("n-min must be at least 1")
        if self.staleness < 1:
            problems.append("staleness must be at least 1")
        if self.latencies is not None and any(v <= 0 for v in self.latencies):
            problems.append("latency ratios must be positive")
        if self.jitter < 0:
            problems.append("jitter must be non-negative")
        if self.command == "evaluate" and self.samples < 1:
            problems.append("evaluate needs at least one sample")
        if self.rounds < 0:
            problems.append("rounds must be non-negative")
        if self.segments < 1 or self.envelope < 1:
            problems.append("segments and envelope must be at least 1")
        if self.backend not in Config.BACKENDS:
            problems.append(f"backend must be one of {', '.join(Config.BACKENDS)}")
        if self.residual_tol <= 0 or self.gap_tol < 0 or self.max_iter < 1:
            problems.append("GBD thresholds must be positive")

        if problems:
            raise ConfigError("; ".join(problems))
        return self
