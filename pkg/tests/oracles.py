"""Independent brute-force reference computations used by the test-suite.

Nothing here imports the package code paths it checks.
"""
import math
from fractions import Fraction

import numpy as np


# ---------------------------------------------------------------- text / tf-idf
def oracle_tokens(text, stopwords):
    """Character-scanning tokenizer with the same rules as the production regex."""
    text = text.lower()
    out, run, i = [], [], 0
    stop = set(stopwords)

    def flush():
        if len(run) >= 2:
            tok = "".join(run)
            if tok not in stop:
                out.append("<num>" if tok.isdigit() else tok)
        run.clear()

    while i < len(text):
        if text.startswith("<num>", i):
            flush()
            if "<num>" not in stop:
                out.append("<num>")
            i += 5
            continue
        ch = text[i]
        if ch != "_" and ch.isalnum():
            run.append(ch)
        else:
            flush()
        i += 1
    flush()
    return out


def oracle_idf(corpus):
    n = len(corpus)
    terms = sorted({t for doc in corpus for t in doc})
    df = {t: sum(1 for doc in corpus if t in doc) for t in terms}
    return {t: math.log((1 + n) / (1 + df[t])) + 1 for t in terms}


def oracle_tfidf(tokens, idf):
    raw = {}
    for t in tokens:
        if t in idf:
            raw[t] = raw.get(t, 0.0) + idf[t]
    norm = math.sqrt(sum(v * v for v in raw.values()))
    if norm == 0:
        return {}
    return {t: v / norm for t, v in raw.items()}


# ---------------------------------------------------------------- linear algebra
def jacobi_eigenvalues(S, tol=1e-15, max_sweeps=100):
    """Cyclic Jacobi rotations on a symmetric matrix; returns eigenvalues descending."""
    A = np.array(S, dtype=np.float64, copy=True)
    n = A.shape[0]
    for _ in range(max_sweeps):
        off = math.sqrt(sum(A[p, q] ** 2 for p in range(n) for q in range(n) if p != q))
        if off <= tol * max(1.0, abs(A).max()):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if A[p, q] == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * A[p, q])
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                J = np.eye(n)
                J[p, p] = c
                J[q, q] = c
                J[p, q] = s
                J[q, p] = -s
                A = J.T @ A @ J
    return np.sort(np.diag(A))[::-1]


def exact_singular_values(M):
    M = np.asarray(M, dtype=np.float64)
    G = M @ M.T if M.shape[0] <= M.shape[1] else M.T @ M
    ev = jacobi_eigenvalues(G)
    return np.sqrt(np.clip(ev, 0.0, None))


# ---------------------------------------------------------------- clustering
def brute_force_assign(points, centers):
    labels = []
    for x in points:
        best, best_d = 0, None
        for j, c in enumerate(centers):
            d = sum((float(a) - float(b)) ** 2 for a, b in zip(x, c))
            if best_d is None or d < best_d:
                best, best_d = j, d
        labels.append(best)
    return labels


def oracle_classify(text, vocab_terms, idf_values, components, mean, scale, centroids, stopwords):
    """Full inference path recomputed from the raw artifact arrays."""
    idf = dict(zip(vocab_terms, idf_values))
    col = {t: i for i, t in enumerate(vocab_terms)}
    vec = oracle_tfidf(oracle_tokens(text, stopwords), idf)
    dim = components.shape[0]
    proj = [0.0] * dim
    for t, v in vec.items():
        c = col[t]
        for r in range(dim):
            proj[r] += components[r, c] * v
    emb = [(proj[r] - mean[r]) / scale[r] for r in range(dim)]
    return brute_force_assign([emb], centroids)[0], emb


# ---------------------------------------------------------------- statistics
def nearest_rank(values, p):
    s = sorted(values)
    rank = math.ceil(p / 100.0 * len(s))
    return s[max(rank, 1) - 1]


def two_pass_mean_std(xs):
    n = len(xs)
    mean = sum(xs) / n
    var = sum((x - mean) ** 2 for x in xs) / n
    return mean, math.sqrt(var)


def gram_pipeline(docs, labels, stopwords, dim):
    """Classifier rebuilt from scratch: scanning tokenizer, formula IDF, top
    eigenvectors of the Gram matrix X^T X, population standardization, and
    centroids recomputed as the means of the given training labels.

    Returns ``classify(text) -> int`` and the singular values.
    """
    toks = [oracle_tokens(d, stopwords) for d in docs]
    idf = oracle_idf(toks)
    terms = sorted(idf)
    col = {t: i for i, t in enumerate(terms)}

    def vec(tokens):
        x = np.zeros(len(terms))
        for t, v in oracle_tfidf(tokens, idf).items():
            x[col[t]] = v
        return x

    X = np.array([vec(t) for t in toks])
    w, V = np.linalg.eigh(X.T @ X)
    order = np.argsort(w)[::-1][:dim]
    basis = V[:, order].T
    big = np.argmax(np.abs(basis), axis=1)
    basis = basis * np.sign(basis[np.arange(len(order)), big])[:, None]
    P = X @ basis.T
    mean = P.mean(axis=0)
    scale = P.std(axis=0)
    scale[scale == 0] = 1.0
    E = (P - mean) / scale
    labels = np.asarray(labels)
    centroids = [E[labels == j].mean(axis=0) for j in range(int(labels.max()) + 1)]

    def classify(text):
        e = (vec(oracle_tokens(text, stopwords)) @ basis.T - mean) / scale
        return brute_force_assign([e], centroids)[0]

    return classify, np.sqrt(np.clip(w[order], 0.0, None))


# ---------------------------------------------------------------- batching engine
def replay_engine(p, seed, trace):
    """Straight-line re-run of the in-flight batching rules.

    ``p``: profile fields as a dict; ``trace``: list of
    ``(id, input_tokens, max_tokens, arrival_ns)``. Returns the full event
    list as tuples ``(kind, id, token_index, t_ns, batch_size, detail)``.
    """
    import zlib

    cap = math.floor(p["kv_cache_gb"] * p["kv_tokens_per_gb"])
    reqs = []
    for rid, n_in, max_tok, arr in trace:
        rng = np.random.default_rng([int(seed) & 0xFFFFFFFF, zlib.crc32(rid.encode("utf-8"))])
        limit = p["max_output_tokens"] if max_tok is None else max(1, min(max_tok, p["max_output_tokens"]))
        n = int(rng.geometric(p["eos_prob"]))
        reqs.append({"id": rid, "in": n_in, "target": min(n, limit), "capped": n > limit, "arr": arr})
    queue = sorted(reqs, key=lambda r: (r["arr"], r["id"]))
    running, reserved, clock, events = [], 0, 0, []
    while queue or running:
        if not running and queue[0]["arr"] > clock:
            clock = queue[0]["arr"]
        now = clock
        kept = []
        for q in queue:
            if q["arr"] <= now and q["in"] + q["target"] > cap:
                events.append(("reject", q["id"], -1, now, len(running), "kv_overflow"))
            else:
                kept.append(q)
        queue = kept
        joined, n_join = 0, 0
        while queue and len(running) < p["max_batch"] and queue[0]["arr"] <= now \
                and reserved + queue[0]["in"] + queue[0]["target"] <= cap:
            q = queue.pop(0)
            q["emitted"] = 0
            running.append(q)
            reserved += q["in"] + q["target"]
            joined += q["in"]
            n_join += 1
            events.append(("admit", q["id"], -1, now, len(running), ""))
        if not running:
            continue
        b = len(running)
        dt = p["decode_base_ns"] + p["decode_batch_coef_ns"] * b + p["tp_comm_overhead_ns"] * (p["tp_degree"] - 1)
        if n_join:
            dt += p["prefill_base_ns"] + p["prefill_coef_ns_per_token"] * joined / p["tp_degree"]
        clock = now + max(1, int(round(dt)))
        left = []
        for r in running:
            events.append(("tok", r["id"], r["emitted"], clock, b, ""))
            r["emitted"] += 1
            if r["emitted"] >= r["target"]:
                events.append(("end", r["id"], r["emitted"], clock, b, "cap" if r["capped"] else "eos"))
                reserved -= r["in"] + r["target"]
            else:
                left.append(r)
        running = left
    return events


# ---------------------------------------------------------------- metrics
def scan_ttft(send, stamps):
    first = stamps[0]
    for t in stamps:
        if t < first:
            first = t
    return (first - send) / 1e9


def pairwise_tpot(stamps):
    gaps = [(b - a) / 1e9 for a, b in zip(stamps, stamps[1:])]
    return sum(gaps) / len(gaps)


def histogram_windows(sends, tokens, window_s):
    """Bin tokens by explicit interval membership ``[lo, hi)``; the last bin is closed."""
    start = min(sends)
    end = max(tokens)
    w = int(round(window_s * 1e9))
    k = 1
    while start + k * w < end:
        k += 1
    counts = []
    for i in range(k):
        lo, hi = start + i * w, start + (i + 1) * w
        last = i == k - 1
        counts.append(sum(1 for t in tokens if lo <= t < hi or (last and t >= hi)
                          or (i == 0 and t < start)))
    return counts


def recount_confusion(clusters, categories, k, m):
    table = [[0] * m for _ in range(k)]
    for c, y in zip(clusters, categories):
        table[c][y] += 1
    return table


def exact_mean_pstd(xs):
    """Mean and population std from exact rational arithmetic, rounded once."""
    fr = [Fraction(x) for x in xs]
    n = len(fr)
    mu = sum(fr) / n
    var = sum((f - mu) ** 2 for f in fr) / n
    return float(mu), math.sqrt(float(var))
