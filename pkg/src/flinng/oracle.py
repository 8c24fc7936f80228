"""Exact similarity search and retrieval metrics: the ground truth for everything else.

``exact_topk`` scans the whole dataset; Jaccard queries go through a token
posting index (exact, just faster than the naive double loop), cosine through
one matrix product. Ties are always broken by ascending point id, and a
query hit in ``evaluate`` means the tie-broken true top-1 id was returned.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError

GT_SEP = ":"


def jaccard(x, y) -> float:
    """|x & y| / |x | y| for two sorted duplicate-free token arrays."""
    x = np.asarray(x, dtype=np.uint64)
    y = np.asarray(y, dtype=np.uint64)
    if x.size == 0 or y.size == 0:
        raise InputError("jaccard is undefined for empty token sets")
    inter = np.intersect1d(x, y, assume_unique=True).size
    return inter / (x.size + y.size - inter)


def cosine(x, y) -> float:
    """dot(x, y) / (|x| |y|) for two equal-dimension vectors."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise InputError(f"dimension mismatch: {x.shape} vs {y.shape}")
    nx = np.linalg.norm(x)
    ny = np.linalg.norm(y)
    if nx == 0.0 or ny == 0.0:
        raise InputError("cosine is undefined for zero vectors")
    return float(np.dot(x, y) / (nx * ny))


class _TokenPostings:
    """token -> point-id posting lists over a token-set corpus."""

    def __init__(self, points):
        self.sizes = np.array([len(p) for p in points], dtype=np.int64)
        if (self.sizes == 0).any():
            raise InputError("corpus contains an empty token set")
        owners = np.repeat(np.arange(len(points), dtype=np.int64), self.sizes)
        flat = np.concatenate([np.asarray(p, dtype=np.uint64) for p in points])
        order = np.argsort(flat, kind="stable")
        flat = flat[order]
        self.owners = owners[order]
        self.tokens, starts = np.unique(flat, return_index=True)
        self.starts = np.append(starts, flat.size)
        self.n = len(points)

    def similarities(self, query):
        q = np.unique(np.asarray(query, dtype=np.uint64))
        if q.size == 0:
            raise InputError("query token set is empty")
        loc = np.searchsorted(self.tokens, q)
        inside = loc < self.tokens.size
        loc = loc[inside]
        loc = loc[self.tokens[loc] == q[inside]]
        hits = [self.owners[self.starts[i] : self.starts[i + 1]] for i in loc]
        inter = np.bincount(
            np.concatenate(hits) if hits else np.empty(0, np.int64), minlength=self.n
        ).astype(np.float64)
        union = self.sizes + q.size - inter
        return inter / union


def _select_topk(sims, k):
    n = sims.shape[0]
    if k >= n:
        cand = np.arange(n)
    else:
        head = np.argpartition(-sims, k - 1)[:k]
        cand = np.flatnonzero(sims >= sims[head].min())  # keep every boundary tie
    order = cand[np.lexsort((cand, -sims[cand]))][:k]
    return order.astype(np.int64), sims[order].astype(np.float64)


def exact_topk(points, query, k, metric):
    """One ground-truth row: (ids, similarities), descending, ties by ascending id."""
    return exact_topk_batch(points, [query], k, metric)[0]


def exact_topk_batch(points, queries, k, metric):
    if k < 1:
        raise InputError(f"k must be >= 1, got {k}")
    if metric == "jaccard":
        postings = _TokenPostings(points)
        return [_select_topk(postings.similarities(q), k) for q in queries]
    if metric == "cosine":
        mat = np.asarray(points, dtype=np.float64)
        norms = np.linalg.norm(mat, axis=1)
        if (norms == 0).any():
            raise InputError("corpus contains a zero vector")
        rows = []
        for q in queries:
            q = np.asarray(q, dtype=np.float64)
            nq = np.linalg.norm(q)
            if nq == 0.0:
                raise InputError("query is a zero vector")
            rows.append(_select_topk(mat @ q / (norms * nq), k))
        return rows
    raise InputError(f"unknown metric {metric!r}")


@dataclass
class EvalReport:
    """Retrieval quality plus optional per-query latency samples (nanoseconds)."""

    recall_at_k: dict = field(default_factory=dict)  # k -> fraction with true top-1 in top k
    precision_at: dict = field(default_factory=dict)  # j -> mean precision vs true top-j
    recall_at: dict = field(default_factory=dict)  # j -> mean recall vs true top-j
    latency_ns: list | None = None


def evaluate(results, truth, k_list, latency_ns=None) -> EvalReport:
    """Score returned id lists against ground-truth rows at each cutoff in k_list."""
    if len(results) != len(truth):
        raise InputError(f"{len(results)} result rows vs {len(truth)} truth rows")
    if not truth:
        raise InputError("cannot evaluate an empty query set")
    report = EvalReport(latency_ns=list(latency_ns) if latency_ns is not None else None)
    for k in k_list:
        hits = prec = rec = 0.0
        for res, (true_ids, _sims) in zip(results, truth):
            res = np.asarray(res, dtype=np.int64)
            got = res[:k]
            want = true_ids[:k]
            hits += float(true_ids.size > 0 and np.isin(true_ids[0], got).item())
            common = np.intersect1d(got, want).size
            prec += common / got.size if got.size else 0.0
            rec += common / want.size if want.size else 0.0
        n = len(results)
        report.recall_at_k[k] = hits / n
        report.precision_at[k] = prec / n
        report.recall_at[k] = rec / n
    return report


def write_ground_truth(path, rows):
    """One line per query: space-separated id:similarity pairs."""
    with open(path, "w", encoding="utf-8") as fh:
        for ids, sims in rows:
            fh.write(" ".join(f"{int(i)}{GT_SEP}{float(s):.17g}" for i, s in zip(ids, sims)))
            fh.write("\n")


def read_ground_truth(path):
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                raise InputError(f"{path}:{lineno}: blank ground-truth line")
            ids = []
            sims = []
            for field_i, part in enumerate(line.split(), 1):
                try:
                    id_s, sim_s = part.split(GT_SEP, 1)
                    ids.append(int(id_s))
                    sims.append(float(sim_s))
                except ValueError as exc:
                    raise InputError(f"{path}:{lineno}: field {field_i}: {part!r}") from exc
            rows.append((np.asarray(ids, dtype=np.int64), np.asarray(sims, dtype=np.float64)))
    if not rows:
        raise InputError(f"{path}: empty ground-truth file")
    return rows
