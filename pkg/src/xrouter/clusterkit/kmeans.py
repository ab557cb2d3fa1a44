import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin

from ..errors import TooFewPoints
from ._validation import check_array, check_is_fitted, check_positive_int, check_random_state


def squared_distances(X: np.ndarray, centers: np.ndarray) -> np.ndarray:
    diff = X[:, None, :] - centers[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def kmeans_plusplus(X: np.ndarray, k: int, rng: np.random.Generator, n_local_trials=None) -> np.ndarray:
    """Greedy k-means++ seeding.

    Every round draws ``n_local_trials`` candidates with probability
    proportional to the squared distance to the nearest chosen center and keeps
    the one that lowers the potential most.
    """
    n = X.shape[0]
    if n_local_trials is None:
        n_local_trials = 2 + int(np.log(k))
    chosen = [int(rng.integers(n))]
    d2 = squared_distances(X, X[chosen])[:, 0]
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(n))
            chosen.append(idx)
            continue
        cum = np.cumsum(d2)
        cand = np.searchsorted(cum, rng.random(n_local_trials) * total, side="right")
        cand = np.minimum(cand, n - 1)
        cand_d2 = np.minimum(d2[None, :], squared_distances(X, X[cand]).T)
        best = int(np.argmin(cand_d2.sum(axis=1)))
        chosen.append(int(cand[best]))
        d2 = cand_d2[best]
    return X[chosen].copy()


class KMeans(ClusterMixin, BaseEstimator):
    """Lloyd's algorithm with k-means++ seeding.

    Stops when the largest centroid displacement drops below ``tol`` or after
    ``max_iter`` iterations. A cluster that empties out is re-seeded at the
    point lying farthest from its own centroid. With ``n_init > 1`` the run is
    repeated from fresh seedings drawn off the same generator and the lowest
    final inertia wins.

    Attributes
    ----------
    cluster_centers_ : ndarray (k, n_features)
    labels_ : ndarray (n_samples,)
    inertia_ : float
    inertia_trace_ : list of float, inertia after every assignment step
    n_iter_ : int
    """

    def __init__(self, n_clusters=8, tol=1e-4, max_iter=100, n_init=1, random_state=0):
        self.n_clusters = n_clusters
        self.tol = tol
        self.max_iter = max_iter
        self.n_init = n_init
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        k = check_positive_int(self.n_clusters, "n_clusters")
        n = X.shape[0]
        if n < k:
            raise TooFewPoints(f"need at least {k} points for {k} clusters, got {n}")
        n_init = check_positive_int(self.n_init, "n_init")
        rng = check_random_state(self.random_state)
        best = None
        for _ in range(n_init):
            run = self._lloyd(X, k, rng)
            if best is None or run[2] < best[2]:
                best = run
        self.cluster_centers_, self.labels_, self.inertia_, self.inertia_trace_, self.n_iter_ = best
        return self

    def _lloyd(self, X, k, rng):
        n = X.shape[0]
        centers = kmeans_plusplus(X, k, rng)
        rows = np.arange(n)
        trace = []
        n_iter = 0
        for n_iter in range(1, self.max_iter + 1):
            d2 = squared_distances(X, centers)
            labels = np.argmin(d2, axis=1)
            trace.append(float(d2[rows, labels].sum()))
            new = centers.copy()
            counts = np.bincount(labels, minlength=k)
            for j in np.flatnonzero(counts):
                new[j] = X[labels == j].mean(axis=0)
            empty = np.flatnonzero(counts == 0)
            if len(empty):
                own = squared_distances(X, new)[rows, labels]
                for j in empty:
                    p = int(np.argmax(own))
                    new[j] = X[p]
                    own[p] = -1.0
            shift = float(np.sqrt(((new - centers) ** 2).sum(axis=1)).max())
            centers = new
            if shift < self.tol:
                break
        d2 = squared_distances(X, centers)
        labels = np.argmin(d2, axis=1)
        inertia = float(d2[rows, labels].sum())
        trace.append(inertia)
        return centers, labels, inertia, trace, n_iter

    def predict(self, X):
        check_is_fitted(self, "cluster_centers_")
        X = check_array(X, dtype=np.float64)
        return np.argmin(squared_distances(X, self.cluster_centers_), axis=1)
