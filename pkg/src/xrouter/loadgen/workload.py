"""Request schedules: categories, input lengths and prompts."""
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..errors import EmptyCategory

N_CATEGORIES = 8


def _dist(kind, **kw):
    return {"kind": kind, **kw}


@dataclass
class WorkloadSpec:
    """What every synthetic user asks for.

    ``category_distribution``: ``{"kind": "uniform"}`` or
    ``{"kind": "normal", "mu": 3.5, "sigma": 1.5}`` over category indices.
    ``input_length_distribution``: ``{"kind": "lognormal", "mu", "sigma", "min", "max"}``
    or ``{"kind": "normal", "mean", "std", "min"[, "max"]}``. A token is a
    whitespace-delimited word.
    """

    category_distribution: dict = field(default_factory=lambda: _dist("uniform"))
    input_length_distribution: dict = field(
        default_factory=lambda: _dist("lognormal", mu=math.log(500), sigma=0.6, min=16, max=2048))
    requests_per_user: int = 1
    max_tokens: int = 1000

    def __post_init__(self):
        cd = self.category_distribution
        if cd.get("kind") == "normal":
            if not cd.get("sigma", 0) > 0:
                raise ValueError("normal category distribution needs sigma > 0")
            cd.setdefault("mu", 3.5)
        elif cd.get("kind") != "uniform":
            raise ValueError(f"unknown category distribution {cd.get('kind')!r}")
        ld = self.input_length_distribution
        kind = ld.get("kind")
        if kind == "lognormal":
            if not ld.get("sigma", 0) > 0:
                raise ValueError("lognormal input length needs sigma > 0")
            for k in ("mu", "min", "max"):
                if k not in ld:
                    raise ValueError(f"lognormal input length needs {k!r}")
        elif kind == "normal":
            if ld.get("std", -1) < 0 or "mean" not in ld:
                raise ValueError("normal input length needs mean and std >= 0")
            ld.setdefault("min", 1)
        else:
            raise ValueError(f"unknown input length distribution {kind!r}")
        if ld.get("max") is not None and ld["max"] < ld["min"]:
            raise ValueError("input length max < min")
        if self.requests_per_user < 1:
            raise ValueError("requests_per_user must be >= 1")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")

    @classmethod
    def uniform(cls, **kw):
        return cls(category_distribution=_dist("uniform"), **kw)

    @classmethod
    def normal(cls, mu=3.5, sigma=1.5, **kw):
        return cls(category_distribution=_dist("normal", mu=mu, sigma=sigma), **kw)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "WorkloadSpec":
        return cls(**data)

    @classmethod
    def load(cls, path) -> "WorkloadSpec":
        return cls.from_dict(json.loads(Path(path).read_text("utf-8")))


def category_weights(spec: WorkloadSpec) -> np.ndarray:
    cd = spec.category_distribution
    if cd["kind"] == "uniform":
        return np.full(N_CATEGORIES, 1.0 / N_CATEGORIES)
    mu, sigma = float(cd["mu"]), float(cd["sigma"])
    pdf = np.array([math.exp(-0.5 * ((i - mu) / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))
                    for i in range(N_CATEGORIES)])
    return pdf / pdf.sum()


def sample_category(spec: WorkloadSpec, rng: np.random.Generator) -> int:
    cdf = np.cumsum(category_weights(spec))
    u = rng.random() * cdf[-1]
    return int(min(np.searchsorted(cdf, u, side="right"), N_CATEGORIES - 1))


def sample_input_length(spec: WorkloadSpec, rng: np.random.Generator) -> int:
    ld = spec.input_length_distribution
    if ld["kind"] == "lognormal":
        x = rng.lognormal(ld["mu"], ld["sigma"])
    else:
        x = rng.normal(ld["mean"], ld["std"]) if ld["std"] > 0 else float(ld["mean"])
    n = int(round(x))
    n = max(int(ld["min"]), n)
    if ld.get("max") is not None:
        n = min(int(ld["max"]), n)
    return n


class PromptSource:
    """Per-category word streams of a categorized corpus."""

    def __init__(self, documents):
        words: dict[int, list[str]] = {}
        for d in documents:
            words.setdefault(int(d["category"]), []).extend(d["text"].split())
        self.words = words

    def build(self, category: int, n_tokens: int, rng: np.random.Generator) -> str:
        stream = self.words.get(category)
        if not stream:
            raise EmptyCategory(f"no documents in category {category}")
        if n_tokens < 1:
            raise ValueError("n_tokens must be >= 1")
        start = int(rng.integers(len(stream)))
        end = start + n_tokens
        if end <= len(stream):
            return " ".join(stream[start:end])
        reps = -(-end // len(stream))
        return " ".join((stream * reps)[start:end])


def build_prompt(corpus, category: int, n_tokens: int, rng: np.random.Generator) -> str:
    """``n_tokens`` consecutive words of ``category``'s documents from a random
    offset, wrapping around the end of the category's word stream."""
    source = corpus if isinstance(corpus, PromptSource) else PromptSource(corpus)
    return source.build(category, n_tokens, rng)


@dataclass
class PlannedRequest:
    id: str
    user_id: int
    index: int
    category: int
    input_tokens: int
    prompt: str
    max_tokens: int


def user_rng(seed: int, user_id: int) -> np.random.Generator:
    return np.random.default_rng([int(seed) & 0xFFFFFFFF, int(user_id)])


def plan_user(spec: WorkloadSpec, source: PromptSource, seed: int, user_id: int, run_id: str = "run") -> list:
    rng = user_rng(seed, user_id)
    out = []
    for k in range(spec.requests_per_user):
        c = sample_category(spec, rng)
        n = sample_input_length(spec, rng)
        prompt = source.build(c, n, rng)
        out.append(PlannedRequest(f"{run_id}-u{user_id:05d}-{k:03d}", user_id, k, c, n, prompt, spec.max_tokens))
    return out


def plan_run(spec: WorkloadSpec, source: PromptSource, seed: int, n_users: int, run_id: str = "run") -> list:
    return [plan_user(spec, source, seed, u, run_id) for u in range(n_users)]
