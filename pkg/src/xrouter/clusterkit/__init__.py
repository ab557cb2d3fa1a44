"""Prompt clustering: TF-IDF, randomized truncated SVD, standardization and k-means."""
from .io import pipeline_load, pipeline_save
from .kmeans import KMeans, kmeans_plusplus
from .pipeline import ClusterPipeline, align_labels
from .scaler import Standardizer
from .svd import RandomizedSVD, randomized_svd
from .text import NUM_TOKEN, default_stopwords, preprocess
from .tfidf import TfidfVectorizer

__all__ = [
    "ClusterPipeline",
    "KMeans",
    "NUM_TOKEN",
    "RandomizedSVD",
    "Standardizer",
    "TfidfVectorizer",
    "align_labels",
    "default_stopwords",
    "kmeans_plusplus",
    "pipeline_load",
    "pipeline_save",
    "preprocess",
    "randomized_svd",
]
