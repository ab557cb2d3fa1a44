import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_is_fitted, check_matrix, check_positive_int, check_random_state


EXACT_LIMIT = 64


def _flip_signs(vt: np.ndarray) -> np.ndarray:
    # largest-magnitude entry of every row made positive
    idx = np.argmax(np.abs(vt), axis=1)
    signs = np.sign(vt[np.arange(vt.shape[0]), idx])
    signs[signs == 0] = 1.0
    return vt * signs[:, None]


def randomized_svd(A, dim: int, seed=0, n_oversamples: int = 10, n_power_iter: int = 2):
    """Rank-``dim`` truncated SVD via a Gaussian range finder with power iterations.

    ``dim`` is clamped to ``min(dim, *A.shape)``. When the short side is at
    most ``EXACT_LIMIT`` or the sketch width ``dim + n_oversamples`` reaches
    half of it, the sketch spans the full short side and the result is exact
    up to round-off.

    Returns ``(singular_values, components)`` with ``components`` of shape
    ``(dim, A.shape[1])`` and orthonormal rows.
    """
    A = check_matrix(A)
    n, m = A.shape
    short = min(n, m)
    dim = min(dim, short)
    width = dim + n_oversamples
    if short <= EXACT_LIMIT or 2 * width >= short:
        width = short
    rng = check_random_state(seed)
    omega = rng.standard_normal((m, width))
    Y = A @ omega
    Q, _ = np.linalg.qr(Y)
    for _ in range(n_power_iter):
        Z, _ = np.linalg.qr(A.T @ Q)
        Q, _ = np.linalg.qr(A @ Z)
    B = (A.T @ Q).T if sp.issparse(A) else Q.T @ A
    _, s, vt = np.linalg.svd(np.asarray(B), full_matrices=False)
    return s[:dim].copy(), _flip_signs(vt[:dim])


class RandomizedSVD(TransformerMixin, BaseEstimator):
    """Truncated SVD projection ``x -> components_ @ x``.

    Attributes
    ----------
    components_ : ndarray (dim, n_features), orthonormal rows
    singular_values_ : ndarray (dim,), non-increasing
    n_components_ : effective dimensionality after clamping
    """

    def __init__(self, n_components=100, n_oversamples=10, n_power_iter=2, random_state=0):
        self.n_components = n_components
        self.n_oversamples = n_oversamples
        self.n_power_iter = n_power_iter
        self.random_state = random_state

    def fit(self, X, y=None):
        check_positive_int(self.n_components, "n_components")
        s, vt = randomized_svd(
            X,
            self.n_components,
            seed=self.random_state,
            n_oversamples=self.n_oversamples,
            n_power_iter=self.n_power_iter,
        )
        self.singular_values_ = s
        self.components_ = vt
        self.n_components_ = len(s)
        return self

    def transform(self, X):
        check_is_fitted(self, "components_")
        X = check_matrix(X)
        return np.asarray(X @ self.components_.T)
