import numpy as np
from scipy.optimize import linear_sum_assignment
from sklearn.base import BaseEstimator, ClusterMixin, TransformerMixin

from ._validation import check_documents, check_is_fitted, check_positive_int
from .kmeans import KMeans, squared_distances
from .scaler import Standardizer
from .svd import RandomizedSVD
from .text import default_stopwords, preprocess
from .tfidf import TfidfVectorizer


def align_labels(labels: np.ndarray, y, k: int) -> np.ndarray:
    """Permutation ``perm`` of cluster ids maximizing agreement ``perm[labels] == y``.

    Only targets in ``[0, k)`` take part, so the result is always a relabeling
    within the existing id range.
    """
    y = np.asarray(y)
    confusion = np.zeros((k, k), dtype=np.int64)
    for c, t in zip(labels, y):
        if 0 <= t < k:
            confusion[c, t] += 1
    rows, cols = linear_sum_assignment(-confusion)
    perm = np.arange(k)
    perm[rows] = cols
    return perm


class ClusterPipeline(TransformerMixin, ClusterMixin, BaseEstimator):
    """Prompt classifier: preprocess -> TF-IDF -> truncated SVD -> standardize -> k-means.

    ``transform`` returns the standardized embedding and ``predict`` the
    nearest-centroid cluster id (ties go to the lowest id). When ``fit`` gets
    category labels ``y``, cluster ids are permuted to agree with them as far
    as possible; the partition itself is unsupervised.

    A fitted pipeline is read-only, so one instance may serve any number of
    threads.
    """

    def __init__(self, n_clusters=8, n_components=100, n_init=10, random_state=0, stopwords=None):
        self.n_clusters = n_clusters
        self.n_components = n_components
        self.n_init = n_init
        self.random_state = random_state
        self.stopwords = stopwords

    def fit(self, X, y=None):
        k = check_positive_int(self.n_clusters, "n_clusters")
        stop = tuple(default_stopwords() if self.stopwords is None else self.stopwords)
        docs = check_documents(X)
        stopset = frozenset(stop)
        tokens = [preprocess(d, stopset) if isinstance(d, str) else list(d) for d in docs]

        self.vectorizer_ = TfidfVectorizer(stopwords=stop).fit(tokens)
        tfidf = self.vectorizer_.transform(tokens)
        self.svd_ = RandomizedSVD(self.n_components, random_state=self.random_state).fit(tfidf)
        projected = self.svd_.transform(tfidf)
        self.scaler_ = Standardizer().fit(projected)
        embedded = self.scaler_.transform(projected)
        km = KMeans(n_clusters=k, n_init=self.n_init, random_state=self.random_state).fit(embedded)

        centers = km.cluster_centers_
        labels = km.labels_
        if y is not None:
            perm = align_labels(labels, y, k)
            reordered = np.empty_like(centers)
            reordered[perm] = centers
            centers = reordered
            labels = perm[labels]
        self.cluster_centers_ = centers
        self.labels_ = labels
        self.inertia_trace_ = km.inertia_trace_
        self.stopwords_ = stop
        self._stopset = stopset
        return self

    @property
    def dim_(self) -> int:
        return self.svd_.n_components_

    def _tokens(self, doc):
        stopset = getattr(self, "_stopset", None)
        if stopset is None:
            stopset = self._stopset = frozenset(self.stopwords_)
        return preprocess(doc, stopset) if isinstance(doc, str) else list(doc)

    def transform(self, X):
        check_is_fitted(self, "cluster_centers_")
        docs = [self._tokens(d) for d in check_documents(X)]
        tfidf = self.vectorizer_.transform(docs)
        return self.scaler_.transform(self.svd_.transform(tfidf))

    def predict(self, X):
        return np.argmin(squared_distances(self.transform(X), self.cluster_centers_), axis=1)

    def embed(self, text: str) -> np.ndarray:
        return self.transform([text])[0]

    def classify(self, text: str) -> int:
        return int(self.predict([text])[0])

    def save(self, path) -> None:
        from .io import pipeline_save

        pipeline_save(self, path)

    @classmethod
    def load(cls, path) -> "ClusterPipeline":
        from .io import pipeline_load

        return pipeline_load(path)
