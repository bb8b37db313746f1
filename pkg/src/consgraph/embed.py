"""Item embedding providers and next-item-prediction (NIP) training.

Three providers produce an :class:`~consgraph.vectors.EmbeddingMatrix`:
precomputed vectors from disk (:func:`~consgraph.vectors.embed_from_file`),
hashed TF-IDF over the ID-free item text (:func:`embed_tfidf`), and a trainable
item table fitted with in-batch negatives (:func:`train_nip`).
"""

import hashlib
import json
import math
import re
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .catalog import verbalize_item
from .errors import EmptyHistory, NonFiniteLoss, ZeroVector
from .rng import stream
from .vectors import EmbeddingMatrix, read_binary, write_binary

_TOKEN = re.compile(r"[^\W_]+")


def tokenize(text):
    """Lowercase and split on anything that is not a letter or digit."""
    return _TOKEN.findall(text.lower())


def idf_weights(docs):
    """Smoothed idf: ln((1 + N) / (1 + df)) + 1."""
    n = len(docs)
    df = Counter(tok for doc in docs for tok in set(doc))
    return {tok: math.log((1 + n) / (1 + c)) + 1.0 for tok, c in df.items()}


def _hash_token(token, seed, dim):
    key = int(seed).to_bytes(8, "little", signed=True)
    h = int.from_bytes(hashlib.blake2b(token.encode("utf-8"), digest_size=8, key=key).digest(), "little")
    return h % dim, 1.0 if (h >> 63) & 1 else -1.0


def assign_buckets(vocabulary, dim, seed):
    """Signed hash buckets for each token, probing linearly past occupied
    buckets while free ones remain.

    The map is injective when the vocabulary fits in ``dim``; beyond that the
    overflow tokens keep their raw hash bucket and may collide.
    """
    taken = np.zeros(dim, dtype=bool)
    free = dim
    out = {}
    for tok in sorted(vocabulary):
        b, sign = _hash_token(tok, seed, dim)
        if free:
            while taken[b]:
                b = (b + 1) % dim
            taken[b] = True
            free -= 1
        out[tok] = (b, sign)
    return out


def embed_tfidf(catalog, dim=4096, seed=0):
    """Hashed TF-IDF vectors of each item's ID-free text, L2-normalized.

    Raw term counts are weighted by smoothed idf and projected into ``dim``
    buckets by a seeded signed hash (see :func:`assign_buckets`). Items
    without any token get the zero vector and are listed in ``flagged``.
    """
    if not catalog:
        raise ValueError("catalog is empty")
    items = list(catalog.values())
    docs = [tokenize(verbalize_item(it, include_id=False)) for it in items]
    idf = idf_weights(docs)
    buckets = assign_buckets(idf, dim, seed)
    out = np.zeros((len(items), dim))
    flagged = []
    for row, (item, doc) in enumerate(zip(items, docs)):
        if not doc:
            flagged.append(item.item_id)
            continue
        for tok, tf in sorted(Counter(doc).items()):
            b, sign = buckets[tok]
            out[row, b] += sign * tf * idf[tok]
        norm = np.linalg.norm(out[row])
        if norm > 0:
            out[row] /= norm
        else:  # overflow tokens cancelled each other in a shared bucket
            flagged.append(item.item_id)
    return EmbeddingMatrix([it.item_id for it in items], out, flagged)


def encode_user(history_item_ids, matrix):
    """Mean of the unit-normalized item vectors, renormalized to unit length."""
    ids = list(history_item_ids)
    if not ids:
        raise EmptyHistory("cannot encode an empty history")
    x = matrix.get(ids).astype(np.float64)
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ZeroVector("history contains an item with a zero vector")
    r = (x / norms).mean(axis=0)
    rn = np.linalg.norm(r)
    if rn == 0:
        raise ZeroVector("history vectors cancel out")
    return r / rn


# --- in-batch NIP loss ------------------------------------------------------

def _pad(contexts, lookup):
    lengths = np.array([len(c) for c in contexts])
    if np.any(lengths == 0):
        raise EmptyHistory("empty context in batch")
    idx = np.zeros((len(contexts), lengths.max()), dtype=np.intp)
    mask = np.zeros(idx.shape, dtype=bool)
    for b, ctx in enumerate(contexts):
        idx[b, :len(ctx)] = lookup(ctx)
        mask[b, :len(ctx)] = True
    return idx, mask, lengths


def nip_loss_and_grad(table, batch_rows, temperature=1.0, want_grad=True):
    """Loss and gradient w.r.t. the full item table.

    ``batch_rows`` is a list of ``(context_row_indices, target_row_index)``.
    Example b's logits are ``u_b . w_{target_j} / temperature`` over every
    target j in the batch; its own target sits in column b.
    Returns ``(loss, grad, probs)``; grad is ``None`` when not requested.
    """
    contexts = [np.asarray(c, dtype=np.intp) for c, _ in batch_rows]
    targets = np.array([t for _, t in batch_rows], dtype=np.intp)
    B = len(batch_rows)
    idx, mask, lengths = _pad(contexts, lambda c: c)

    w_ctx = table[idx]                                   # (B, L, d)
    w_norm = np.linalg.norm(w_ctx, axis=2, keepdims=True)
    w_norm = np.where(mask[..., None], w_norm, 1.0)
    x = w_ctx / w_norm * mask[..., None]
    r = x.sum(axis=1) / lengths[:, None]                 # (B, d)
    r_norm = np.linalg.norm(r, axis=1, keepdims=True)
    u = r / r_norm
    v = table[targets]                                   # (B, d)

    logits = u @ v.T / temperature
    logits -= logits.max(axis=1, keepdims=True)
    expl = np.exp(logits)
    total = expl.sum(axis=1, keepdims=True)
    probs = expl / total
    diag = np.arange(B)
    loss = float(np.mean(np.log(total[:, 0]) - logits[diag, diag]))
    if not want_grad:
        return loss, None, probs

    g_logits = probs.copy()
    g_logits[diag, diag] -= 1.0
    g_logits /= B * temperature
    grad = np.zeros_like(table)
    np.add.at(grad, targets, g_logits.T @ u)
    g_u = g_logits @ v
    g_r = (g_u - u * np.sum(u * g_u, axis=1, keepdims=True)) / r_norm
    g_x = np.broadcast_to((g_r / lengths[:, None])[:, None, :], x.shape)
    g_w = (g_x - x * np.sum(x * g_x, axis=2, keepdims=True)) / w_norm
    np.add.at(grad, idx[mask], g_w[mask])
    return loss, grad, probs


# --- trainable model ----------------------------------------------------------

@dataclass
class TrainConfig:
    dim: int = 64
    lr: float = 1e-4
    batch_size: int = 32
    epochs: int = 10
    temperature: float = 1.0
    seed: int = 0
    dtype: str = "float64"

    def __post_init__(self):
        if self.dim < 1 or self.batch_size < 2 or self.epochs < 0:
            raise ValueError("dim >= 1, batch_size >= 2 and epochs >= 0 required")
        if not self.temperature > 0 or self.lr < 0:
            raise ValueError("temperature must be positive and lr non-negative")
        if self.dtype not in ("float64", "float32"):
            raise ValueError("dtype must be float64 or float32")


@dataclass
class TrainableModel:
    item_table: EmbeddingMatrix
    temperature: float = 1.0
    rng_seed: int = 0
    config: TrainConfig = field(default_factory=TrainConfig)
    loss_trace: list = field(default_factory=list)

    def save(self, directory, name="model"):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        write_binary(self.item_table, directory / f"{name}.cgv")
        meta = {"config": asdict(self.config), "loss_trace": self.loss_trace,
                "temperature": self.temperature, "rng_seed": self.rng_seed}
        (directory / f"{name}.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, directory, name="model"):
        directory = Path(directory)
        meta = json.loads((directory / f"{name}.json").read_text())
        table = read_binary(directory / f"{name}.cgv")
        return cls(table, meta["temperature"], meta["rng_seed"], TrainConfig(**meta["config"]),
                   meta["loss_trace"])


def init_table(item_ids, dim, seed, dtype=np.float64):
    """Uniform in [-1/sqrt(dim), 1/sqrt(dim)] from the ``init`` stream."""
    bound = 1.0 / math.sqrt(dim)
    values = stream(seed, "init").uniform(-bound, bound, size=(len(item_ids), dim))
    return EmbeddingMatrix(item_ids, values.astype(dtype))


def _as_pairs(examples):
    pairs = []
    for ex in examples:
        if hasattr(ex, "context"):
            pairs.append((tuple(ex.context), ex.target))
        else:
            ctx, tgt = ex
            pairs.append((tuple(ctx), tgt))
    return pairs


def _rows(model_or_table, pairs):
    table = model_or_table.item_table if isinstance(model_or_table, TrainableModel) else model_or_table
    return [(table.rows(ctx), table.rows([t])[0]) for ctx, t in pairs]


def nip_loss(batch, model, temperature=None):
    """Mean in-batch softmax cross-entropy of each example's true target."""
    pairs = _as_pairs(batch)
    if len(pairs) < 2:
        raise ValueError("batch size must be >= 2")
    table = model.item_table if isinstance(model, TrainableModel) else model
    if temperature is None:
        temperature = model.temperature if isinstance(model, TrainableModel) else 1.0
    loss, _, _ = nip_loss_and_grad(table.vectors.astype(np.float64), _rows(table, pairs),
                                   temperature, want_grad=False)
    return loss


class Adam:
    def __init__(self, shape, lr, beta1=0.9, beta2=0.999, eps=1e-8, dtype=np.float64):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(shape, dtype=dtype)
        self.v = np.zeros(shape, dtype=dtype)
        self.t = 0

    def step(self, params, grad):
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        params -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
        return params


def batches(n, batch_size, rng):
    """Shuffled index batches; a trailing batch of one is folded into the
    previous batch because the in-batch softmax needs two examples."""
    order = rng.permutation(n)
    out = [order[i:i + batch_size] for i in range(0, n, batch_size)]
    if len(out) > 1 and len(out[-1]) < 2:
        out[-2] = np.concatenate([out[-2], out.pop()])
    return out


def train_nip(examples, config=None, item_ids=None, init=None):
    """Fit an item table on next-item prediction with in-batch negatives.

    ``examples`` are split examples or ``(context, target)`` pairs. The item
    universe defaults to every id in the examples; ``init`` may supply a
    starting :class:`EmbeddingMatrix` instead of the seeded uniform draw.
    Deterministic for a fixed ``config.seed``.
    """
    config = config or TrainConfig()
    pairs = _as_pairs(examples)
    if len(pairs) < 2:
        raise ValueError("need at least two training examples")
    if item_ids is None:
        item_ids = sorted({i for ctx, t in pairs for i in (*ctx, t)})
    dtype = np.dtype(config.dtype)
    if init is None:
        table = init_table(item_ids, config.dim, config.seed, dtype)
    else:
        table = EmbeddingMatrix(item_ids, init.get(item_ids).astype(dtype))
    rows = _rows(table, pairs)
    params = table.vectors.copy()
    opt = Adam(params.shape, config.lr, dtype=dtype)
    rng = stream(config.seed, "shuffle")
    trace, step = [], 0
    for _ in range(config.epochs):
        total, count = 0.0, 0
        for b in batches(len(rows), config.batch_size, rng):
            # overflow shows up as a non-finite loss, reported below
            with np.errstate(over="ignore", invalid="ignore"):
                loss, grad, _ = nip_loss_and_grad(params, [rows[i] for i in b], config.temperature)
            if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
                raise NonFiniteLoss(step, loss)
            opt.step(params, grad.astype(dtype, copy=False))
            if not np.all(np.isfinite(params)):
                raise NonFiniteLoss(step, "parameters")
            total += loss * len(b)
            count += len(b)
            step += 1
        trace.append(total / count)
    model_table = EmbeddingMatrix(item_ids, params)
    return TrainableModel(model_table, config.temperature, config.seed, config, trace)


def evaluate_loss(model, examples, batch_size=32):
    """Size-weighted mean in-batch loss over consecutive batches (no shuffle)."""
    pairs = _as_pairs(examples)
    table = model.item_table
    rows = _rows(table, pairs)
    idx = np.arange(len(rows))
    chunks = [idx[i:i + batch_size] for i in range(0, len(rows), batch_size)]
    if len(chunks) > 1 and len(chunks[-1]) < 2:
        chunks[-2] = np.concatenate([chunks[-2], chunks.pop()])
    total = 0.0
    for c in chunks:
        loss, _, _ = nip_loss_and_grad(table.vectors.astype(np.float64), [rows[i] for i in c],
                                       model.temperature, want_grad=False)
        total += loss * len(c)
    return total / len(rows)
