"""Classifier training with a cluster-vs-category report."""
import numpy as np

from ..clusterkit import ClusterPipeline
from .corpus import CorpusBundle


def confusion_matrix(clusters, categories, k: int, n_categories: int) -> np.ndarray:
    """Rows are clusters, columns are categories."""
    m = np.zeros((k, n_categories), dtype=np.int64)
    np.add.at(m, (np.asarray(clusters, dtype=np.int64), np.asarray(categories, dtype=np.int64)), 1)
    return m


def purity(matrix: np.ndarray) -> dict:
    """Per-cluster share of the majority category, and the overall share."""
    matrix = np.asarray(matrix)
    sizes = matrix.sum(axis=1)
    per = [float(row.max() / n) if n else 0.0 for row, n in zip(matrix, sizes)]
    total = int(sizes.sum())
    overall = float(matrix.max(axis=1).sum() / total) if total else 0.0
    return {"per_cluster": per, "overall": overall}


def format_confusion(matrix: np.ndarray) -> str:
    k, m = matrix.shape
    width = max(5, len(str(int(matrix.max(initial=0)))) + 1)
    head = "cluster" + "".join(f"{'c' + str(j):>{width}}" for j in range(m)) + f"{'purity':>9}"
    pur = purity(matrix)["per_cluster"]
    rows = [head]
    for i in range(k):
        rows.append(f"{i:>7}" + "".join(f"{int(v):>{width}}" for v in matrix[i]) + f"{pur[i]:>9.3f}")
    return "\n".join(rows)


def train(corpus: CorpusBundle, k: int = 8, seed: int = 0, out_path=None, n_components: int = 100):
    """Fit the classifier on the corpus; returns ``(pipeline, report)``.

    ``report`` holds the confusion matrix over the training documents and
    the purity figures. With ``out_path`` the artifact is written there.
    """
    texts, cats = corpus.texts, corpus.categories
    pipe = ClusterPipeline(n_clusters=k, n_components=n_components, random_state=seed).fit(texts, cats)
    matrix = confusion_matrix(pipe.labels_, cats, k, corpus.n_categories)
    report = {"k": k, "seed": seed, "confusion": matrix.tolist(), "purity": purity(matrix)}
    if out_path is not None:
        pipe.save(out_path)
    return pipe, report
