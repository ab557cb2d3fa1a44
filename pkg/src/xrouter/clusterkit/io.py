"""Binary artifact format for a fitted :class:`ClusterPipeline`.

Layout (all integers little-endian)::

    b"XRPIPE01" | u32 version | u32 header_len | header (UTF-8 JSON)
    | f64 arrays: idf, components (row-major), singular_values, mean, scale,
      centroids (row-major)
    | u32 CRC32 of every preceding byte
"""
import json
import os
import struct
import zlib

import numpy as np

from ..errors import CorruptFile, VersionMismatch
from .kmeans import KMeans
from .scaler import Standardizer
from .svd import RandomizedSVD
from .tfidf import TfidfVectorizer

MAGIC = b"XRPIPE01"
VERSION = 1


def _arrays(p):
    return [
        p.vectorizer_.idf_,
        p.svd_.components_,
        p.svd_.singular_values_,
        p.scaler_.mean_,
        p.scaler_.scale_,
        p.cluster_centers_,
    ]


def pipeline_bytes(p) -> bytes:
    vocab = sorted(p.vectorizer_.vocabulary_, key=p.vectorizer_.vocabulary_.get)
    header = {
        "k": int(p.cluster_centers_.shape[0]),
        "dim": int(p.svd_.n_components_),
        "vocab_size": len(vocab),
        "n_docs": int(p.vectorizer_.n_docs_),
        "random_state": p.random_state,
        "stopwords": list(p.stopwords_),
        "vocabulary": vocab,
        "checksum": "crc32",
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    body = bytearray(MAGIC)
    body += struct.pack("<II", VERSION, len(head))
    body += head
    for arr in _arrays(p):
        body += np.ascontiguousarray(arr, dtype="<f8").tobytes()
    body += struct.pack("<I", zlib.crc32(bytes(body)))
    return bytes(body)


def pipeline_save(p, path) -> None:
    data = pipeline_bytes(p)
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def pipeline_load(path):
    from .pipeline import ClusterPipeline

    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 16 or data[:8] != MAGIC:
        raise CorruptFile(f"{path}: not a pipeline artifact")
    version, head_len = struct.unpack_from("<II", data, 8)
    if version != VERSION:
        raise VersionMismatch(f"{path}: artifact version {version}, expected {VERSION}")
    if len(data) < 20 or zlib.crc32(data[:-4]) != struct.unpack("<I", data[-4:])[0]:
        raise CorruptFile(f"{path}: checksum mismatch")
    try:
        header = json.loads(data[16 : 16 + head_len].decode("utf-8"))
        k, dim, V = header["k"], header["dim"], header["vocab_size"]
        shapes = [(V,), (dim, V), (dim,), (dim,), (dim,), (k, dim)]
        offset = 16 + head_len
        arrays = []
        for shape in shapes:
            count = int(np.prod(shape))
            arr = np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(shape)
            arrays.append(arr.astype(np.float64))
            offset += 8 * count
        if offset != len(data) - 4:
            raise CorruptFile(f"{path}: trailing bytes")
    except (KeyError, ValueError, UnicodeDecodeError) as exc:
        if isinstance(exc, CorruptFile):
            raise
        raise CorruptFile(f"{path}: malformed body ({exc})") from exc

    idf, components, svals, mean, scale, centroids = arrays
    p = ClusterPipeline(n_clusters=k, n_components=dim, random_state=header.get("random_state", 0))
    vec = TfidfVectorizer(stopwords=tuple(header["stopwords"]))
    vec.vocabulary_ = {t: i for i, t in enumerate(header["vocabulary"])}
    vec.idf_ = idf
    vec.n_docs_ = header["n_docs"]
    svd = RandomizedSVD(n_components=dim)
    svd.components_ = components
    svd.singular_values_ = svals
    svd.n_components_ = dim
    scaler = Standardizer()
    scaler.mean_ = mean
    scaler.scale_ = scale
    p.vectorizer_, p.svd_, p.scaler_ = vec, svd, scaler
    p.cluster_centers_ = centroids
    p.stopwords_ = tuple(header["stopwords"])
    p._stopset = frozenset(p.stopwords_)
    return p
