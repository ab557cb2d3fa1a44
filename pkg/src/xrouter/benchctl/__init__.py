"""Orchestration: corpus ingestion, training, experiments, sweeps and the ``xr`` CLI."""
from .config import ExperimentConfig, SweepConfig, env_overrides
from .corpus import CorpusBundle, bundled_corpus_path, ingest_corpus, parse_corpus
from .experiment import check_routing, run_experiment, run_experiment_async
from .train import confusion_matrix, purity, train

__all__ = [
    "CorpusBundle",
    "ExperimentConfig",
    "SweepConfig",
    "bundled_corpus_path",
    "check_routing",
    "confusion_matrix",
    "env_overrides",
    "ingest_corpus",
    "parse_corpus",
    "purity",
    "run_experiment",
    "run_experiment_async",
    "train",
]
