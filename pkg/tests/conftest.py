import json
import sys
from importlib import resources
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))


def _corpus():
    text = resources.files("xrouter.data").joinpath("corpus.jsonl").read_text("utf-8")
    return [json.loads(line) for line in text.splitlines() if line.strip()]


@pytest.fixture(scope="session")
def corpus_docs():
    return _corpus()


@pytest.fixture(scope="session")
def trained_pipeline(corpus_docs):
    from xrouter.clusterkit import ClusterPipeline

    texts = [d["text"] for d in corpus_docs]
    labels = [d["category"] for d in corpus_docs]
    return ClusterPipeline(random_state=0).fit(texts, labels)


@pytest.fixture(scope="session")
def pipeline_path(trained_pipeline, tmp_path_factory):
    path = tmp_path_factory.mktemp("artifact") / "pipe.bin"
    trained_pipeline.save(path)
    return path


ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
