"""Input validation helpers shared by the clusterkit estimators."""
import numbers

import numpy as np
import scipy.sparse as sp
from sklearn.utils.validation import check_array, check_is_fitted  # noqa: F401


def check_random_state(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        seed = 0
    if not isinstance(seed, numbers.Integral):
        raise TypeError(f"random_state must be an int or Generator, got {seed!r}")
    return np.random.default_rng(int(seed))


def check_documents(X) -> list:
    """Accept a single string, an iterable of strings, or an iterable of token lists."""
    if isinstance(X, str):
        return [X]
    docs = list(X)
    for d in docs:
        if not isinstance(d, (str, list, tuple)):
            raise TypeError(f"documents must be str or token lists, got {type(d).__name__}")
    return docs


def check_matrix(X):
    """Float64 2-D array, or CSR matrix when sparse."""
    if sp.issparse(X):
        return sp.csr_matrix(X, dtype=np.float64)
    return check_array(X, dtype=np.float64, ensure_min_samples=1)


def check_positive_int(value, name: str, minimum: int = 1) -> int:
    if not isinstance(value, numbers.Integral) or value < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)
