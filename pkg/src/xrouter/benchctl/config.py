"""Experiment and sweep configuration (JSON files, env overrides)."""
import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from ..loadgen import WorkloadSpec

TOPOLOGIES = ("baseline_A", "baseline_B", "baseline_C", "expert_D", "expert_E", "custom")
MODES = ("lockstep", "free")

# topology -> (profile, number of backends, one backend per cluster?)
BUILTIN_TOPOLOGIES = {
    "baseline_A": ("A", 1, False),
    "baseline_B": ("B", 1, False),
    "baseline_C": ("C", 2, False),
    "expert_D": ("D", 8, True),
    "expert_E": ("E", 8, True),
}


def _levels(levels, what="concurrency_levels"):
    levels = [int(x) for x in levels]
    if not levels:
        raise ValueError(f"{what} must not be empty")
    if levels[0] < 1 or any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError(f"{what} must be positive and strictly ascending, got {levels}")
    return levels


def env_overrides(environ=None) -> dict:
    """``XR_SEED`` / ``XR_TIME_SCALE`` from the environment, parsed."""
    environ = os.environ if environ is None else environ
    out = {}
    if environ.get("XR_SEED", "").strip():
        out["seed"] = int(environ["XR_SEED"])
    if environ.get("XR_TIME_SCALE", "").strip():
        out["time_scale"] = float(environ["XR_TIME_SCALE"])
    return out


@dataclass
class ExperimentConfig:
    """One scenario: a topology and a workload run at several concurrency levels.

    ``profiles`` maps backend names to profile specs (shipped name or JSON
    path) and ``routes`` maps cluster ids to backend names; both are filled
    in for the built-in topologies and required for ``custom``.

    ``mode="lockstep"`` makes the virtual-time logs independent of wall-clock
    scheduling; ``"free"`` lets the backends run on their own, paced by
    ``time_scale``. ``route_policy`` ``None`` picks ``request_hash`` for
    lockstep runs and ``round_robin`` otherwise.
    """

    scenario: str = "run"
    topology: str = "expert_E"
    profiles: dict = field(default_factory=dict)
    routes: dict = field(default_factory=dict)
    gateway_instances: int = 16
    concurrency_levels: list = field(default_factory=lambda: [1] + list(range(100, 1001, 100)))
    workload: WorkloadSpec = field(default_factory=WorkloadSpec)
    repeats: int = 1
    time_scale: float = 0.0
    seed: int = 0
    output_dir: str = "results"
    artifact: str | None = None
    corpus: str | None = None
    k: int = 8
    window_s: float = 2.0
    mode: str = "lockstep"
    route_policy: str | None = None
    control_round: bool = True
    host: str = "127.0.0.1"
    base_port: int = 0

    def __post_init__(self):
        if isinstance(self.workload, dict):
            self.workload = WorkloadSpec.from_dict(self.workload)
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"unknown topology {self.topology!r}; expected one of {TOPOLOGIES}")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        self.concurrency_levels = _levels(self.concurrency_levels)
        if self.gateway_instances < 1:
            raise ValueError("gateway_instances must be >= 1")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if self.time_scale < 0:
            raise ValueError("time_scale must be >= 0")
        if self.window_s <= 0:
            raise ValueError("window_s must be > 0")
        if self.topology == "custom":
            if not self.profiles or not self.routes:
                raise ValueError("custom topology needs profiles and routes")
        else:
            prof, n, per_cluster = BUILTIN_TOPOLOGIES[self.topology]
            if not self.profiles:
                self.profiles = {f"b{i}": prof for i in range(self.k if per_cluster else n)}
            if not self.routes:
                names = sorted(self.profiles)
                if per_cluster:
                    self.routes = {str(c): [names[c % len(names)]] for c in range(self.k)}
                else:
                    self.routes = {str(c): list(names) for c in range(self.k)}
        self.routes = {str(c): list(v) if isinstance(v, (list, tuple)) else [v] for c, v in self.routes.items()}
        for c, names in self.routes.items():
            unknown = [n for n in names if n not in self.profiles]
            if not names or unknown:
                raise ValueError(f"cluster {c} routes to unknown backends {unknown or names}")
        covered = sorted(int(c) for c in self.routes)
        if covered != list(range(self.k)):
            raise ValueError(f"routes cover clusters {covered}, expected 0..{self.k - 1}")

    @property
    def effective_route_policy(self) -> str:
        if self.route_policy is not None:
            return self.route_policy
        return "request_hash" if self.mode == "lockstep" else "round_robin"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["workload"] = self.workload.to_dict()
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        names = {f.name for f in fields(cls)}
        extra = set(data) - names
        if extra:
            raise ValueError(f"unknown experiment config keys {sorted(extra)}")
        return cls(**data)

    @classmethod
    def load(cls, path, environ=None) -> "ExperimentConfig":
        data = json.loads(Path(path).read_text("utf-8"))
        data.update(env_overrides(environ))
        return cls.from_dict(data)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", "utf-8")


@dataclass
class SweepConfig:
    """Batch size x data-format variant x tensor-parallel grid.

    Each variant is a profile whose KV budget is recomputed per tp degree as
    ``tp * usable_gb_per_gpu - weights_gb``. Cells report the virtual total
    time (makespan) of a closed-loop run, as mean and std over repeats.
    """

    batch_sizes: list = field(default_factory=lambda: [20, 100, 200, 400, 600])
    variants: dict = field(default_factory=lambda: {"fp16": "sweep_fp16", "fp8": "sweep_fp8"})
    tp_degrees: list = field(default_factory=lambda: [4, 8])
    concurrency_levels: list = field(default_factory=lambda: list(range(1, 500, 100)))
    max_tokens: int = 200
    input_mean: float = 335.0
    input_std: float = 30.0
    requests_per_user: int = 1
    repeats: int = 5
    usable_gb_per_gpu: float = 62.0
    seed: int = 0
    output_dir: str = "sweep"

    def __post_init__(self):
        for name in ("batch_sizes", "tp_degrees"):
            vals = [int(x) for x in getattr(self, name)]
            if not vals or min(vals) < 1:
                raise ValueError(f"{name} must be a non-empty list of positive integers")
            setattr(self, name, vals)
        if not self.variants:
            raise ValueError("variants must not be empty")
        self.concurrency_levels = _levels(self.concurrency_levels)
        if self.repeats < 1 or self.requests_per_user < 1 or self.max_tokens < 1:
            raise ValueError("repeats, requests_per_user and max_tokens must be >= 1")

    def workload(self) -> WorkloadSpec:
        return WorkloadSpec.uniform(
            input_length_distribution={"kind": "normal", "mean": self.input_mean, "std": self.input_std, "min": 1},
            requests_per_user=self.requests_per_user, max_tokens=self.max_tokens)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SweepConfig":
        names = {f.name for f in fields(cls)}
        extra = set(data) - names
        if extra:
            raise ValueError(f"unknown sweep config keys {sorted(extra)}")
        return cls(**data)

    @classmethod
    def load(cls, path, environ=None) -> "SweepConfig":
        data = json.loads(Path(path).read_text("utf-8"))
        ov = env_overrides(environ)
        if "seed" in ov:
            data["seed"] = ov["seed"]
        return cls.from_dict(data)
