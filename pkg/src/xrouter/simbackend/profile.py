"""Backend capacity and latency parameterization."""
import json
import math
import zlib
from dataclasses import asdict, dataclass, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class ModelProfile:
    name: str
    tp_degree: int
    weights_gb: float
    kv_cache_gb: float
    max_batch: int
    kv_tokens_per_gb: float
    prefill_coef_ns_per_token: float
    prefill_base_ns: float
    decode_base_ns: float
    decode_batch_coef_ns: float
    tp_comm_overhead_ns: float
    eos_prob: float
    max_output_tokens: int = 1000

    def __post_init__(self):
        if not isinstance(self.tp_degree, int) or self.tp_degree < 1:
            raise ValueError(f"tp_degree must be an integer >= 1, got {self.tp_degree!r}")
        if not isinstance(self.max_batch, int) or self.max_batch < 1:
            raise ValueError(f"max_batch must be an integer >= 1, got {self.max_batch!r}")
        if not isinstance(self.max_output_tokens, int) or self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be an integer >= 1")
        for f in ("weights_gb", "kv_cache_gb", "kv_tokens_per_gb", "prefill_coef_ns_per_token",
                  "prefill_base_ns", "decode_base_ns", "decode_batch_coef_ns", "tp_comm_overhead_ns"):
            v = getattr(self, f)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{f} must be finite and >= 0, got {v!r}")
        if not 0 < self.eos_prob <= 1:
            raise ValueError(f"eos_prob must lie in (0, 1], got {self.eos_prob!r}")

    @property
    def kv_capacity_tokens(self) -> int:
        return int(math.floor(self.kv_cache_gb * self.kv_tokens_per_gb))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelProfile":
        names = {f.name for f in fields(cls)}
        required = {f.name for f in fields(cls) if f.name != "max_output_tokens"}
        extra = set(data) - names
        missing = required - set(data)
        if extra or missing:
            raise ValueError(f"profile fields mismatch: missing={sorted(missing)} unknown={sorted(extra)}")
        data = dict(data)
        for f in ("tp_degree", "max_batch", "max_output_tokens"):
            if f in data and isinstance(data[f], float) and data[f].is_integer():
                data[f] = int(data[f])
        return cls(**data)

    @classmethod
    def load(cls, path) -> "ModelProfile":
        return cls.from_dict(json.loads(Path(path).read_text("utf-8")))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", "utf-8")

    def with_(self, **changes) -> "ModelProfile":
        return replace(self, **changes)


def builtin_profile_path(name: str) -> Path:
    """Path of a profile shipped with the package (``A`` .. ``E``, ``probe``, ...)."""
    ref = resources.files("xrouter.data").joinpath("profiles", f"{name}.json")
    return Path(str(ref))


def load_profile(spec) -> ModelProfile:
    """Load from a ModelProfile, a path, or the name of a shipped profile."""
    if isinstance(spec, ModelProfile):
        return spec
    p = Path(spec)
    if p.suffix == ".json" or p.exists():
        return ModelProfile.load(p)
    return ModelProfile.load(builtin_profile_path(str(spec)))


def prefill_time(p: ModelProfile, n_input: int) -> float:
    return p.prefill_base_ns + p.prefill_coef_ns_per_token * n_input / p.tp_degree


def iteration_time(p: ModelProfile, batch_size: int, joining_prefill_tokens: int = 0, joining: bool | None = None) -> float:
    """Duration of one engine iteration in ns.

    The prefill of requests admitted at this boundary piggybacks on the
    iteration and is charged once; ``joining`` defaults to
    ``joining_prefill_tokens > 0``.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    dt = p.decode_base_ns + p.decode_batch_coef_ns * batch_size + p.tp_comm_overhead_ns * (p.tp_degree - 1)
    if joining is None:
        joining = joining_prefill_tokens > 0
    if joining:
        dt += prefill_time(p, joining_prefill_tokens)
    return dt


def draw_output_length(rng: np.random.Generator, p: ModelProfile, cap: int | None = None) -> tuple[int, bool]:
    """Geometric output length clamped to ``[1, cap]``; also reports whether the clamp hit."""
    limit = p.max_output_tokens if cap is None else max(1, min(cap, p.max_output_tokens))
    n = int(rng.geometric(p.eos_prob))
    if n > limit:
        return limit, True
    return n, False


def sample_output_length(rng: np.random.Generator, p: ModelProfile) -> int:
    return draw_output_length(rng, p)[0]


def request_rng(seed: int, request_id: str) -> np.random.Generator:
    # per-request stream so output lengths do not depend on arrival order
    return np.random.default_rng([int(seed) & 0xFFFFFFFF, zlib.crc32(request_id.encode("utf-8"))])
