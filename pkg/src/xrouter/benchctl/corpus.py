"""Categorized prompt corpus (JSONL, one ``{"text", "category"}`` per line)."""
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from ..errors import MissingCategory, ParseError

N_CATEGORIES = 8


@dataclass
class CorpusBundle:
    documents: list
    n_categories: int = N_CATEGORIES

    @property
    def texts(self) -> list:
        return [d["text"] for d in self.documents]

    @property
    def categories(self) -> list:
        return [d["category"] for d in self.documents]

    def counts(self) -> list:
        out = [0] * self.n_categories
        for d in self.documents:
            out[d["category"]] += 1
        return out


def bundled_corpus_path() -> Path:
    return Path(str(resources.files("xrouter.data").joinpath("corpus.jsonl")))


def parse_corpus(lines, n_categories: int = N_CATEGORIES) -> CorpusBundle:
    docs = []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise ParseError(f"invalid JSON: {e.msg}", lineno) from None
        if not isinstance(obj, dict):
            raise ParseError("expected an object", lineno)
        text, cat = obj.get("text"), obj.get("category")
        if not isinstance(text, str) or not text.strip():
            raise ParseError("missing or empty 'text'", lineno)
        if isinstance(cat, bool) or not isinstance(cat, int):
            raise ParseError("'category' must be an integer", lineno)
        if not 0 <= cat < n_categories:
            raise ParseError(f"category {cat} outside 0..{n_categories - 1}", lineno)
        docs.append({"text": text, "category": cat})
    bundle = CorpusBundle(docs, n_categories)
    for c, n in enumerate(bundle.counts()):
        if n == 0:
            raise MissingCategory(c)
    return bundle


def ingest_corpus(path=None, n_categories: int = N_CATEGORIES) -> CorpusBundle:
    """Read and validate a corpus file; ``None`` means the bundled sample."""
    path = bundled_corpus_path() if path is None else Path(path)
    with open(path, encoding="utf-8") as f:
        return parse_corpus(f, n_categories)
