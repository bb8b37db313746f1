"""Synthetic corpora with known preference structure.

:func:`gen_planted` builds single-user instances whose geometry satisfies the
three conditions under which the maximum connected component equals the
preference set exactly:

(i)   every pair of preferred items has cosine >= tau,
(ii)  no preferred/noise pair reaches tau,
(iii) every connected component made only of noise items is smaller than
      the preference set.

:func:`gen_noisy_corpus` builds multi-user interaction logs where each user
draws from a home cluster and occasionally from elsewhere.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .catalog import InteractionHistory, ItemRecord
from .errors import GenerationFailed
from .graph import connected_components, graph_from_similarities, similarity_matrix
from .ingest import Dataset
from .rng import stream
from .vectors import EmbeddingMatrix

MAX_ATTEMPTS = 10_000


def unit(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def sample_cap(center, half_angle, size, rng):
    """Unit vectors at angle at most ``half_angle`` from the unit ``center``."""
    d = len(center)
    w = rng.standard_normal((size, d))
    w -= np.outer(w @ center, center)
    w = unit(w)
    phi = rng.uniform(0.0, half_angle, size=size)
    return np.cos(phi)[:, None] * center + np.sin(phi)[:, None] * w


@dataclass(frozen=True)
class PlantedInstance:
    preferred: frozenset
    noise: frozenset
    embeddings: EmbeddingMatrix
    tau: float
    history: InteractionHistory

    @property
    def m(self):
        return len(self.preferred)


@dataclass
class AssumptionReport:
    holds: bool
    violations: list = field(default_factory=list)
    p_complete: bool = True
    cross_edges: int = 0
    max_noise_component: int = 0


def _noise_component_sizes(sims, tau):
    if len(sims) == 0:
        return []
    g = graph_from_similarities(range(len(sims)), sims, tau)
    return connected_components(g).sizes


def verify_assumptions(inst):
    """Exhaustive pairwise check of conditions (i)-(iii).

    Violations are ``(condition, detail)`` tuples with condition one of
    ``"i"``, ``"ii"``, ``"iii"``.
    """
    P = sorted(inst.preferred)
    N = sorted(inst.noise)
    tau = inst.tau
    sp = similarity_matrix(inst.embeddings.get(P))
    violations = []
    for a in range(len(P)):
        for b in range(a + 1, len(P)):
            if sp[a, b] < tau:
                violations.append(("i", f"S({P[a]},{P[b]}) = {sp[a, b]:.6f} < tau"))
    cross = 0
    if N:
        both = similarity_matrix(inst.embeddings.get(P + N))
        pn = both[:len(P), len(P):]
        for a, b in zip(*np.nonzero(pn >= tau)):
            cross += 1
            violations.append(("ii", f"S({P[a]},{N[b]}) = {pn[a, b]:.6f} >= tau"))
        sizes = _noise_component_sizes(both[len(P):, len(P):], tau)
    else:
        sizes = []
    largest = max(sizes, default=0)
    if largest >= len(P):
        violations.append(("iii", f"noise component of size {largest} >= m = {len(P)}"))
    p_complete = not any(v[0] == "i" for v in violations)
    return AssumptionReport(not violations, violations, p_complete, cross, largest)


def gen_planted(m, n_noise, tau=0.7, dim=16, seed=0, clump=True, duplicates=0,
                max_attempts=MAX_ATTEMPTS):
    """Draw a planted instance and check it exhaustively before returning.

    Preferred vectors come from a spherical cap of half-angle arccos(tau)/2
    around a random center, so any two are within arccos(tau) of each other.
    Noise vectors are rejection-sampled; with ``clump`` they are drawn in
    small groups around their own centers so that noise-noise edges occur
    and condition (iii) is exercised rather than trivially met.
    ``duplicates`` extra events repeat already-seen items in the history.
    """
    if m < 2 or dim < 3 or n_noise < 0:
        raise ValueError("need m >= 2, dim >= 3 and n_noise >= 0")
    if not -1.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [-1, 1]")
    rng = stream(seed, "planted")
    # shrink slightly so rounding cannot push a boundary pair under tau
    half = math.acos(tau) / 2 * (1 - 1e-6)
    center = unit(rng.standard_normal(dim))
    pref = sample_cap(center, half, m, rng)

    noise, attempts = [], 0
    group_center, group_left = None, 0
    while len(noise) < n_noise:
        if attempts >= max_attempts:
            raise GenerationFailed(attempts, f"placed {len(noise)} of {n_noise} noise items")
        attempts += 1
        if clump and group_left == 0:
            group_left = int(rng.integers(1, m))
            group_center = unit(rng.standard_normal(dim))
        if clump:
            cand = sample_cap(group_center, half, 1, rng)[0]
        else:
            cand = unit(rng.standard_normal(dim))
        if np.any(pref @ cand >= tau - 1e-9):
            group_left = 0
            continue
        trial = np.vstack([noise, cand[None]]) if noise else cand[None]
        sizes = _noise_component_sizes(similarity_matrix(trial), tau)
        if max(sizes) >= m:
            group_left = 0
            continue
        noise.append(cand)
        group_left = max(group_left - 1, 0)

    n = m + n_noise
    labels = rng.permutation(n)
    ids = [f"i{k:04d}" for k in labels]
    vectors = np.vstack([pref] + ([np.array(noise)] if noise else []))
    matrix = EmbeddingMatrix(ids, vectors)
    order = list(rng.permutation(n))
    order += [int(rng.integers(0, n)) for _ in range(duplicates)]
    history = InteractionHistory("u0", tuple((ids[k], t) for t, k in enumerate(order)))
    inst = PlantedInstance(frozenset(ids[:m]), frozenset(ids[m:]), matrix, float(tau), history)
    report = verify_assumptions(inst)
    if not report.holds:
        raise GenerationFailed(attempts, f"verifier rejected instance: {report.violations[:3]}")
    return inst


# --- noisy multi-user corpora -----------------------------------------------------

@dataclass(frozen=True)
class NoisyCorpusConfig:
    n_users: int = 200
    n_clusters: int = 4
    items_per_cluster: int = 25
    history_len: int = 20
    noise_rate: float = 0.3
    dim: int = 64
    seed: int = 0
    spread: float = 0.3

    def __post_init__(self):
        if min(self.n_users, self.n_clusters, self.items_per_cluster, self.history_len, self.dim) < 1:
            raise ValueError("all counts must be positive")
        if not 0.0 <= self.noise_rate < 1.0:
            raise ValueError("noise_rate must lie in [0, 1)")
        if self.noise_rate > 0 and self.n_clusters < 2:
            raise ValueError("noise needs at least two clusters")
        if self.spread < 0:
            raise ValueError("spread must be non-negative")


@dataclass
class NoisyCorpus:
    dataset: Dataset
    ground_truth: dict
    embeddings: EmbeddingMatrix
    home: dict
    cluster_of: dict

    def __iter__(self):
        return iter((self.dataset, self.ground_truth))


def cluster_centers(n_clusters, dim, rng):
    """Orthonormal centers when they fit in ``dim``, random unit vectors otherwise."""
    g = rng.standard_normal((dim, n_clusters))
    if n_clusters <= dim:
        q, r = np.linalg.qr(g)
        return (q * np.sign(np.diag(r))).T
    return unit(g.T)


def gen_noisy_corpus(cfg):
    """Corpus of users with one home cluster each.

    Item vectors sit at a fixed angle atan(spread) from their cluster center,
    so two items of one cluster are at most 2*atan(spread) apart (cosine at
    least 0.835 for the default spread 0.3). Each event is a home-cluster item
    with probability 1 - noise_rate, otherwise a uniform item from another
    cluster. ``ground_truth[u]`` is the set of home-cluster items in u's
    history. Item text is ``category: cluster<k> name: item<j>``.
    """
    rng = stream(cfg.seed, "corpus")
    centers = cluster_centers(cfg.n_clusters, cfg.dim, rng)
    ids, vecs, cluster_of, catalog = [], [], {}, {}
    for k, c in enumerate(centers):
        w = rng.standard_normal((cfg.items_per_cluster, cfg.dim))
        w -= np.outer(w @ c, c)
        w = unit(w)
        for j in range(cfg.items_per_cluster):
            item_id = f"c{k}i{j:03d}"
            ids.append(item_id)
            vecs.append(unit(c + cfg.spread * w[j]))
            cluster_of[item_id] = k
            catalog[item_id] = ItemRecord(item_id, (("category", f"cluster{k}"),
                                                    ("name", f"item{len(ids) - 1}")))
    matrix = EmbeddingMatrix(ids, np.array(vecs))
    members = [[i for i in ids if cluster_of[i] == k] for k in range(cfg.n_clusters)]
    width = len(str(cfg.n_users - 1))
    histories, ground_truth, home = {}, {}, {}
    for u in range(cfg.n_users):
        user_id = f"u{u:0{width}d}"
        h = int(rng.integers(cfg.n_clusters))
        others = [i for k, m in enumerate(members) if k != h for i in m]
        events = []
        for t in range(cfg.history_len):
            if rng.random() < cfg.noise_rate:
                item = others[int(rng.integers(len(others)))]
            else:
                item = members[h][int(rng.integers(len(members[h])))]
            events.append((item, t))
        histories[user_id] = InteractionHistory(user_id, tuple(events))
        ground_truth[user_id] = frozenset(i for i, _ in events if cluster_of[i] == h)
        home[user_id] = h
    return NoisyCorpus(Dataset(catalog, histories), ground_truth, matrix, home, cluster_of)


def filter_precision_recall(retained, preferred):
    """Precision and recall of a retained item set against the planted one."""
    retained, preferred = set(retained), set(preferred)
    hit = len(retained & preferred)
    precision = hit / len(retained) if retained else 1.0
    recall = hit / len(preferred) if preferred else 1.0
    return precision, recall
