import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_array, check_is_fitted


class Standardizer(TransformerMixin, BaseEstimator):
    """Subtract the column mean and divide by the column standard deviation.

    Columns with zero training variance get ``scale_ = 1``.
    """

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        self.mean_ = X.mean(axis=0)
        scale = X.std(axis=0)
        scale[scale == 0] = 1.0
        self.scale_ = scale
        return self

    def transform(self, X):
        check_is_fitted(self, "mean_")
        X = check_array(X, dtype=np.float64)
        return (X - self.mean_) / self.scale_
