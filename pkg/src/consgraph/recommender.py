"""Dot-product scoring, full-catalog ranking and (de)noised training."""

from dataclasses import dataclass

import numpy as np

from .embed import TrainConfig, encode_user, train_nip
from .errors import DimensionMismatch, UnknownItem
from .graph import DEFAULT_TAU, denoise

TOP_K_CAP = 100


@dataclass(frozen=True)
class RankingResult:
    user_id: str
    target_id: str
    rank: int
    top_k: tuple = ()

    def to_dict(self):
        return {"user_id": self.user_id, "target_id": self.target_id, "rank": self.rank,
                "top_k": [[i, s] for i, s in self.top_k]}


@dataclass(frozen=True)
class FilterConfig:
    enabled: bool = True
    tau: float = DEFAULT_TAU


def score_candidates(user_vec, matrix):
    """``[(item_id, u . v)]`` over every item, in matrix order."""
    u = np.asarray(user_vec, dtype=np.float64)
    if u.shape != (matrix.dim,):
        raise DimensionMismatch("user", matrix.dim, u.shape[-1] if u.ndim else None)
    scores = matrix.vectors.astype(np.float64) @ u
    return list(zip(matrix.ids, scores.tolist()))


def softmax(scores):
    """Ranking probabilities; accepts raw scores or ``score_candidates`` output."""
    s = np.asarray([x[1] if isinstance(x, tuple) else x for x in scores], dtype=np.float64)
    e = np.exp(s - s.max())
    return e / e.sum()


def ranking_order(ids, scores):
    """Indices sorted by score descending, ties by item id ascending."""
    return np.lexsort((np.asarray(ids), -np.asarray(scores)))


def rank_of(ids, scores, target_index):
    """1-based rank of one entry under (score desc, id asc)."""
    s = np.asarray(scores)
    t = s[target_index]
    tid = ids[target_index]
    ahead = int(np.sum(s > t))
    ties = np.flatnonzero(s == t)
    ahead += sum(1 for i in ties if ids[i] < tid)
    return ahead + 1


def prepare_context(context_ids, mode="raw", tau=DEFAULT_TAU, filter_matrix=None):
    """The context the recommender sees: raw, or restricted to its maximum
    connected component (the held-out target is never part of ``context_ids``)."""
    context_ids = list(context_ids)
    if mode == "raw":
        return context_ids
    if mode != "filtered":
        raise ValueError(f"mode must be 'raw' or 'filtered', got {mode!r}")
    if filter_matrix is None:
        raise ValueError("filtered mode needs a filter matrix")
    return denoise(context_ids, filter_matrix, tau, exclude_last=False).item_ids


def rank_target(context_ids, target_id, matrix, mode="raw", tau=DEFAULT_TAU, filter_matrix=None,
                user_id="", k=TOP_K_CAP, mask_history=False):
    """Rank ``target_id`` against the whole item set of ``matrix``.

    In filtered mode the context is denoised with ``filter_matrix`` (default:
    ``matrix`` itself). ``mask_history`` drops previously seen items other
    than the target from the candidate list; it is off by default.
    """
    if target_id not in matrix:
        raise UnknownItem(target_id)
    if filter_matrix is None:
        filter_matrix = matrix
    context = prepare_context(context_ids, mode, tau, filter_matrix)
    u = encode_user(context, matrix)
    ids = matrix.ids
    scores = matrix.vectors.astype(np.float64) @ u
    if mask_history:
        seen = set(context_ids) - {target_id}
        keep = np.array([i not in seen for i in ids])
        ids = [i for i, m in zip(ids, keep) if m]
        scores = scores[keep]
    target_index = ids.index(target_id)
    rank = rank_of(ids, scores, target_index)
    order = ranking_order(ids, scores)[:min(k, TOP_K_CAP)]
    top = tuple((ids[i], float(scores[i])) for i in order)
    return RankingResult(user_id, target_id, rank, top)


def denoise_examples(examples, filter_config, filter_matrix):
    """``(context, target)`` pairs with contexts denoised when enabled."""
    pairs = []
    for ex in examples:
        ctx, tgt = (ex.context, ex.target) if hasattr(ex, "context") else ex
        if filter_config.enabled:
            ctx = prepare_context(ctx, "filtered", filter_config.tau, filter_matrix)
        pairs.append((tuple(ctx), tgt))
    return pairs


def train_recommender(train_examples, filter_config=None, model_config=None, filter_matrix=None,
                      item_ids=None, init=None):
    """Train the item table on raw or denoised contexts via :func:`train_nip`."""
    filter_config = filter_config or FilterConfig(enabled=False)
    model_config = model_config or TrainConfig()
    pairs = denoise_examples(train_examples, filter_config, filter_matrix)
    return train_nip(pairs, model_config, item_ids=item_ids, init=init)
