import math
from collections import Counter

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, TransformerMixin

from ..errors import EmptyCorpus
from ._validation import check_documents, check_is_fitted
from .text import preprocess


class TfidfVectorizer(TransformerMixin, BaseEstimator):
    """TF-IDF with smoothed idf ``ln((1 + n) / (1 + df)) + 1`` and L2-normalized rows.

    Documents may be raw strings (run through :func:`preprocess`) or
    already-tokenized lists.

    Attributes
    ----------
    vocabulary_ : dict mapping term -> column, assigned in lexicographic order
    idf_ : ndarray of shape (n_terms,)
    n_docs_ : number of training documents
    """

    def __init__(self, stopwords=None):
        self.stopwords = stopwords

    def _tokenizer(self):
        stop = None if self.stopwords is None else frozenset(self.stopwords)

        def tokens(doc):
            return preprocess(doc, stop) if isinstance(doc, str) else list(doc)

        return tokens

    def fit(self, X, y=None):
        tokens = self._tokenizer()
        docs = [tokens(d) for d in check_documents(X)]
        if not docs:
            raise EmptyCorpus("cannot fit TF-IDF on zero documents")
        df = Counter()
        for toks in docs:
            df.update(set(toks))
        terms = sorted(df)
        n = len(docs)
        self.vocabulary_ = {t: i for i, t in enumerate(terms)}
        self.idf_ = np.array([math.log((1 + n) / (1 + df[t])) + 1.0 for t in terms])
        self.n_docs_ = n
        return self

    def transform(self, X):
        check_is_fitted(self, "vocabulary_")
        docs = check_documents(X)
        vocab = self.vocabulary_
        tokens = self._tokenizer()
        indptr, indices, data = [0], [], []
        for doc in docs:
            counts = Counter(t for t in tokens(doc) if t in vocab)
            cols = sorted(vocab[t] for t in counts)
            inv = {vocab[t]: c for t, c in counts.items()}
            vals = np.array([inv[c] * self.idf_[c] for c in cols], dtype=np.float64)
            norm = math.sqrt(float(vals @ vals)) if len(vals) else 0.0
            if norm > 0:
                vals = vals / norm
            indices.extend(cols)
            data.extend(vals.tolist())
            indptr.append(len(indices))
        return sp.csr_matrix(
            (np.asarray(data, dtype=np.float64), np.asarray(indices, dtype=np.int64), indptr),
            shape=(len(docs), len(vocab)),
        )

    def transform_tokens(self, tokens) -> np.ndarray:
        """Dense TF-IDF vector for one token list."""
        return self.transform([list(tokens)]).toarray()[0]
