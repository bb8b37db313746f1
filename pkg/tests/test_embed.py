import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from consgraph.catalog import ItemRecord, verbalize_item
from consgraph.embed import (TrainConfig, embed_tfidf, encode_user, evaluate_loss, nip_loss,
                             nip_loss_and_grad, tokenize, train_nip)
from consgraph.errors import EmptyHistory, NonFiniteLoss, ZeroVector
from consgraph.vectors import EmbeddingMatrix


def exact_tfidf_cosines(catalog):
    """Unhashed sparse TF-IDF, computed with dictionaries."""
    docs = [Counter(tokenize(verbalize_item(it, include_id=False))) for it in catalog.values()]
    n = len(docs)
    df = Counter(t for d in docs for t in d)
    vecs = []
    for d in docs:
        v = {t: c * (math.log((1 + n) / (1 + df[t])) + 1) for t, c in d.items()}
        norm = math.sqrt(sum(x * x for x in v.values()))
        vecs.append({t: x / norm for t, x in v.items()})
    out = np.zeros((n, n))
    for a in range(n):
        for b in range(n):
            out[a, b] = sum(x * vecs[b].get(t, 0.0) for t, x in vecs[a].items())
    return out


def zipf_catalog(n_items, vocab, seed):
    rng = np.random.default_rng(seed)
    p = 1.0 / np.arange(1, vocab + 1)
    p /= p.sum()
    cat = {}
    for k in range(n_items):
        words = rng.choice(vocab, size=rng.integers(2, 9), p=p)
        cat[f"i{k}"] = ItemRecord(f"i{k}", [("title", " ".join(f"w{w}" for w in words))])
    return cat


def test_tfidf_matches_exact_oracle():
    cat = zipf_catalog(200, 500, 0)
    m = embed_tfidf(cat, dim=4096, seed=0)
    got = m.vectors @ m.vectors.T
    assert np.abs(got - exact_tfidf_cosines(cat)).max() < 0.05


def test_tfidf_unit_rows_and_shape():
    m = embed_tfidf(zipf_catalog(30, 50, 1), dim=256)
    assert m.vectors.shape == (30, 256)
    np.testing.assert_allclose(np.linalg.norm(m.vectors, axis=1), 1.0)


def test_tfidf_disjoint_tokens_orthogonal():
    # attribute names are part of the text, so they differ too
    cat = {"a": ItemRecord("a", [("title", "red apple")]),
           "b": ItemRecord("b", [("brand", "blue whale")])}
    m = embed_tfidf(cat, dim=4096)
    assert abs(m["a"] @ m["b"]) < 1e-12


def test_tfidf_empty_text_flagged():
    cat = {"a": ItemRecord("a", [("title", "x")]), "b": ItemRecord("b", [])}
    m = embed_tfidf(cat)
    assert list(m.flagged) == ["b"] and not m["b"].any()


def test_tfidf_deterministic():
    cat = zipf_catalog(40, 60, 2)
    a, b = embed_tfidf(cat, 512, seed=3), embed_tfidf(cat, 512, seed=3)
    assert np.array_equal(a.vectors, b.vectors)


def test_tfidf_ignores_item_id():
    cat1 = {"a": ItemRecord("a", [("t", "x y")]), "b": ItemRecord("b", [("t", "y z")])}
    cat2 = {"zzz": ItemRecord("zzz", [("t", "x y")]), "b": ItemRecord("b", [("t", "y z")])}
    np.testing.assert_array_equal(embed_tfidf(cat1).vectors, embed_tfidf(cat2).vectors)


def test_encode_user_two_orthogonal():
    m = EmbeddingMatrix(["a", "b"], np.eye(2) * [3.0, 0.5])
    np.testing.assert_allclose(encode_user(["a", "b"], m), np.array([1, 1]) / math.sqrt(2))


def test_encode_user_errors():
    m = EmbeddingMatrix(["a", "b", "z"], np.array([[1.0, 0], [-1.0, 0], [0, 0]]))
    with pytest.raises(EmptyHistory):
        encode_user([], m)
    with pytest.raises(ZeroVector):
        encode_user(["a", "b"], m)
    with pytest.raises(ZeroVector):
        encode_user(["z"], m)


@given(st.lists(st.integers(0, 4), min_size=1, max_size=10), st.integers(0, 100))
def test_encode_user_unit_and_order_free(ids, seed):
    rng = np.random.default_rng(seed)
    m = EmbeddingMatrix([f"i{k}" for k in range(5)], rng.normal(size=(5, 6)) + 3.0)
    names = [f"i{k}" for k in ids]
    u = encode_user(names, m)
    assert abs(np.linalg.norm(u) - 1) < 1e-12
    np.testing.assert_allclose(u, encode_user(names[::-1], m), atol=1e-12)


def two_item_model():
    return EmbeddingMatrix(["e1", "e2"], np.eye(2))


def test_nip_loss_two_by_two():
    batch = [(["e1"], "e1"), (["e2"], "e2")]
    assert nip_loss(batch, two_item_model()) == pytest.approx(math.log(1 + math.exp(-1)), abs=1e-12)
    assert math.log(1 + math.exp(-1)) == pytest.approx(0.3133, abs=1e-4)


def test_nip_loss_uniform_logits_is_log_batch():
    m = EmbeddingMatrix(["c", "t1", "t2", "t3", "t4"], np.vstack([np.eye(5)[0], np.eye(5)[1:]]))
    batch = [(["c"], f"t{k}") for k in range(1, 5)]
    assert nip_loss(batch, m) == pytest.approx(math.log(4), abs=1e-12)


def test_nip_loss_batch_order_invariant():
    rng = np.random.default_rng(0)
    m = EmbeddingMatrix([f"i{k}" for k in range(8)], rng.normal(size=(8, 4)))
    batch = [(["i0", "i1"], "i2"), (["i3"], "i4"), (["i5", "i6", "i0"], "i7")]
    assert nip_loss(batch, m) == pytest.approx(nip_loss(batch[::-1], m), abs=1e-12)


def test_nip_probs_sum_to_one():
    rng = np.random.default_rng(1)
    table = rng.normal(size=(6, 3))
    _, _, probs = nip_loss_and_grad(table, [([0], 1), ([2, 3], 4), ([5], 0)], 0.5, want_grad=False)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0)


def test_nip_loss_needs_two():
    with pytest.raises(ValueError):
        nip_loss([(["e1"], "e2")], two_item_model())


def numeric_grad(table, rows, temperature, h=1e-4):
    g = np.zeros_like(table)
    for idx in np.ndindex(table.shape):
        plus, minus = table.copy(), table.copy()
        plus[idx] += h
        minus[idx] -= h
        g[idx] = (nip_loss_and_grad(plus, rows, temperature, False)[0]
                  - nip_loss_and_grad(minus, rows, temperature, False)[0]) / (2 * h)
    return g


def relative_error(analytic, numeric):
    # floor keeps batches with repeated targets (constant loss, zero gradient) meaningful
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-8)
    return np.linalg.norm(analytic - numeric) / scale


def random_batch(rng):
    n_items, dim = int(rng.integers(4, 9)), int(rng.integers(2, 6))
    table = rng.normal(size=(n_items, dim))
    rows = [(rng.integers(0, n_items, size=rng.integers(1, 5)).tolist(), int(rng.integers(n_items)))
            for _ in range(int(rng.integers(2, 6)))]
    return table, rows, float(rng.uniform(0.3, 2.0))


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(7)
    for _ in range(20):
        table, rows, temp = random_batch(rng)
        _, g, _ = nip_loss_and_grad(table, rows, temp)
        num = numeric_grad(table, rows, temp)
        assert relative_error(g, num) < 1e-4


def cluster_examples(n_clusters=2, size=8, n=400, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        c = int(rng.integers(n_clusters))
        items = [f"c{c}_{k}" for k in rng.integers(0, size, size=4)]
        out.append((items[:3], items[3]))
    return out


def test_zero_lr_leaves_table_unchanged():
    ex = cluster_examples()
    start = train_nip(ex, TrainConfig(dim=8, epochs=0, seed=4)).item_table
    after = train_nip(ex, TrainConfig(dim=8, epochs=3, lr=0.0, seed=4)).item_table
    assert np.array_equal(start.vectors, after.vectors)


def intra_minus_inter(table):
    x = table.normalized()
    sims = x.vectors @ x.vectors.T
    c = np.array([int(i[1]) for i in table.ids])
    same = (c[:, None] == c[None, :]) & ~np.eye(len(c), dtype=bool)
    return sims[same].mean() - sims[c[:, None] != c[None, :]].mean()


def test_training_separates_clusters():
    ex = cluster_examples()
    cfg = TrainConfig(dim=16, lr=0.01, epochs=200, batch_size=32, seed=0)
    before = train_nip(ex, TrainConfig(dim=16, epochs=0, seed=0))
    after = train_nip(ex, cfg)
    assert intra_minus_inter(after.item_table) > intra_minus_inter(before.item_table) + 0.3
    assert after.loss_trace[-1] < after.loss_trace[0]


def test_training_deterministic():
    ex = cluster_examples(n=100)
    cfg = TrainConfig(dim=8, lr=0.01, epochs=3, seed=11)
    a, b = train_nip(ex, cfg), train_nip(ex, cfg)
    assert np.array_equal(a.item_table.vectors, b.item_table.vectors)
    assert a.loss_trace == b.loss_trace


def test_non_finite_loss_raises():
    ex = cluster_examples(n=20)
    init = EmbeddingMatrix(sorted({i for c, t in ex for i in (*c, t)}), np.ones((16, 4)))
    init.vectors[0, 0] = np.nan
    with pytest.raises(NonFiniteLoss) as err:
        train_nip(ex, TrainConfig(dim=4, epochs=1), init=init)
    assert err.value.step == 0


def test_model_save_load_roundtrip(tmp_path):
    model = train_nip(cluster_examples(n=50), TrainConfig(dim=4, lr=0.01, epochs=2))
    model.save(tmp_path, "m")
    back = type(model).load(tmp_path, "m")
    np.testing.assert_allclose(back.item_table.vectors, model.item_table.vectors, rtol=1e-6)
    assert back.loss_trace == model.loss_trace and back.config == model.config


def test_evaluate_loss_matches_nip_loss_for_one_batch():
    ex = cluster_examples(n=10)
    model = train_nip(ex, TrainConfig(dim=4, epochs=1, lr=0.01))
    assert evaluate_loss(model, ex, batch_size=32) == pytest.approx(nip_loss(ex, model), abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_loss_bounded_below_by_zero_and_finite(seed):
    table, rows, temp = random_batch(np.random.default_rng(seed))
    loss, grad, _ = nip_loss_and_grad(table, rows, temp)
    assert loss >= 0 and np.isfinite(loss) and np.all(np.isfinite(grad))
