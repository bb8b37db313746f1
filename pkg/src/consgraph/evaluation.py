"""Top-K metrics over full rankings, paired permutation tests and
similarity analysis of retained items."""

import csv
import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import EmptyResults, LengthMismatch
from .rng import stream

DEFAULT_KS = (10, 20)


def recall_at_k(rank, k):
    if rank < 1:
        raise ValueError("rank is 1-based")
    return 1.0 if rank <= k else 0.0


def ndcg_at_k(rank, k):
    """Single relevant target, so the ideal DCG is 1."""
    if rank < 1:
        raise ValueError("rank is 1-based")
    return 1.0 / math.log2(rank + 1) if rank <= k else 0.0


def metric_names(ks=DEFAULT_KS):
    return [f"R@{k}" for k in ks] + [f"N@{k}" for k in ks]


def per_user_metric(ranks, name):
    fn, k = (recall_at_k if name[0] == "R" else ndcg_at_k), int(name[2:])
    return np.array([fn(r, k) for r in ranks])


@dataclass
class EvalReport:
    per_user: list
    metrics: dict
    n_users: int
    significance: dict = field(default_factory=dict)

    def to_dict(self):
        return {"n_users": self.n_users, "metrics": self.metrics,
                "per_user": [[u, r] for u, r in self.per_user],
                "significance": {m: list(v) for m, v in self.significance.items()}}

    @classmethod
    def from_dict(cls, obj):
        return cls([tuple(x) for x in obj["per_user"]], obj["metrics"], obj["n_users"],
                   {m: tuple(v) for m, v in obj.get("significance", {}).items()})


def aggregate(results, ks=DEFAULT_KS):
    """Unweighted means of Recall@K and NDCG@K over users."""
    results = list(results)
    if not results:
        raise EmptyResults("no ranking results to aggregate")
    ranks = [r.rank for r in results]
    metrics = {name: float(per_user_metric(ranks, name).mean()) for name in metric_names(ks)}
    return EvalReport([(r.user_id, r.rank) for r in results], metrics, len(results))


def permutation_test(a, b, resamples=10000, seed=0, chunk=2000):
    """Two-sided paired sign-flip test on the mean difference ``a - b``.

    p = (1 + #{|mean of sign-flipped diffs| >= |observed mean|}) / (1 + resamples)
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise LengthMismatch(f"{a.shape} vs {b.shape}")
    if a.ndim != 1 or len(a) < 2:
        raise ValueError("need at least two paired observations")
    d = a - b
    observed = abs(d.mean())
    # ulp-scale slack so sign patterns that reproduce the observed mean count
    tol = 1e-12 * max(1.0, np.abs(d).max())
    rng = stream(seed, "permutation")
    hits, done = 0, 0
    while done < resamples:
        n = min(chunk, resamples - done)
        signs = rng.integers(0, 2, size=(n, len(d))) * 2 - 1
        hits += int(np.sum(np.abs(signs @ d / len(d)) >= observed - tol))
        done += n
    return (1 + hits) / (1 + resamples)


def compare_reports(report, baseline, baseline_name="baseline", resamples=10000, seed=0):
    """Per-metric p-values for ``report`` vs ``baseline`` on their shared users."""
    base = dict(baseline.per_user)
    users = [(u, r) for u, r in report.per_user if u in base]
    if len(users) < 2:
        raise EmptyResults("fewer than two users shared with the baseline")
    ours = [r for _, r in users]
    theirs = [base[u] for u, _ in users]
    out = {}
    for name in report.metrics:
        p = permutation_test(per_user_metric(ours, name), per_user_metric(theirs, name), resamples, seed)
        out[name] = (baseline_name, p)
    return out


# --- similarity analysis --------------------------------------------------------

@dataclass(frozen=True)
class SimilarityRow:
    user_id: str
    intra_sim: float
    target_sim: float
    singleton: bool


def _unit(matrix, ids):
    x = matrix.get(ids).astype(np.float64)
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def retained_similarity(item_ids, target_id, matrix):
    """(mean pairwise cosine among distinct items, mean cosine to target, singleton?)"""
    items = list(dict.fromkeys(item_ids))
    x = _unit(matrix, items)
    t = _unit(matrix, [target_id])[0]
    if len(items) == 1:
        intra = 1.0
    else:
        sims = x @ x.T
        intra = float(np.mean([sims[i, j] for i, j in combinations(range(len(items)), 2)]))
    return intra, float(np.mean(x @ t)), len(items) == 1


@dataclass
class SimilarityReport:
    rows: list
    raw_rows: list

    def means(self):
        def m(rows, attr):
            return float(np.mean([getattr(r, attr) for r in rows]))
        return {"intra_sim": m(self.rows, "intra_sim"), "target_sim": m(self.rows, "target_sim"),
                "raw_intra_sim": m(self.raw_rows, "intra_sim"),
                "raw_target_sim": m(self.raw_rows, "target_sim"),
                "singletons": sum(r.singleton for r in self.rows)}

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["user_id", "intra_sim", "target_sim"])
            for r in self.rows:
                w.writerow([r.user_id, repr(r.intra_sim), repr(r.target_sim)])


def similarity_report(histories, filtered, matrix, targets):
    """Per-user similarity of retained items among themselves and to the
    target, alongside the same statistics for the unfiltered history.

    All three mappings are keyed by user id; ``histories`` and ``filtered``
    hold item-id sequences. Users are reported in sorted order.
    """
    rows, raw_rows = [], []
    for user_id in sorted(filtered):
        rows.append(SimilarityRow(user_id, *retained_similarity(filtered[user_id], targets[user_id], matrix)))
        raw_rows.append(SimilarityRow(user_id, *retained_similarity(histories[user_id], targets[user_id], matrix)))
    return SimilarityReport(rows, raw_rows)
