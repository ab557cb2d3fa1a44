import re
from functools import lru_cache
from importlib import resources

NUM_TOKEN = "<num>"

# "<num>" is matched as a unit so that preprocessing is idempotent on its own output.
_TOKEN_RE = re.compile(r"<num>|[^\W_]{2,}")


@lru_cache(maxsize=1)
def default_stopwords() -> tuple[str, ...]:
    raw = resources.files("xrouter.data").joinpath("stopwords.txt").read_text("utf-8")
    return tuple(w.strip() for w in raw.splitlines() if w.strip())


@lru_cache(maxsize=1)
def _default_stopset() -> frozenset:
    return frozenset(default_stopwords())


def preprocess(text: str, stopwords=None) -> list[str]:
    """Lowercase, tokenize, drop stopwords and map all-digit tokens to ``<num>``.

    Tokens are maximal runs of at least two alphanumeric characters.
    """
    if stopwords is None:
        stop = _default_stopset()
    elif isinstance(stopwords, frozenset):
        stop = stopwords
    else:
        stop = frozenset(stopwords)
    out = []
    for tok in _TOKEN_RE.findall(text.lower()):
        if tok in stop:
            continue
        out.append(NUM_TOKEN if tok.isdigit() else tok)
    return out
