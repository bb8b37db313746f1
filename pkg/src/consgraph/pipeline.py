"""End-to-end stages shared by the command line: provider resolution,
filter/recommender training, evaluation and the threshold sweep."""

import hashlib
import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .embed import TrainableModel, embed_tfidf, train_nip
from .errors import ConfigError
from .evaluation import aggregate, metric_names, similarity_report
from .parallel import ordered_map
from .recommender import FilterConfig, prepare_context, rank_target, train_recommender
from .rng import substream_seed
from .vectors import embed_from_file

log = logging.getLogger(__name__)

TFIDF_DIM = 4096
SWEEP_TAUS = tuple(round(0.2 + 0.1 * i, 1) for i in range(7))
PATH_KEYS = ("catalog", "log", "vectors", "splits", "model", "out_dir")


def sha256_file(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def config_digest(cfg):
    """Hash of the configuration without its path fields, so reruns into a
    different directory produce the same manifest."""
    text = "".join(line + "\n" for line in cfg.to_text().splitlines()
                   if line.split(" = ", 1)[0] not in PATH_KEYS)
    return hashlib.sha256(text.encode()).hexdigest()


def write_manifest(out_dir, cfg, files, inputs=(), extra=None):
    out_dir = Path(out_dir)
    manifest = {
        "config_sha256": config_digest(cfg),
        "inputs": {Path(p).name: sha256_file(p) for p in inputs},
        "outputs": {Path(p).name: sha256_file(p) for p in files},
    }
    if extra:
        manifest.update(extra)
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def split_universe(splits):
    return sorted({i for rows in splits.values() for ex in rows for i in (*ex.context, ex.target)})


def filter_model_seed(seed):
    return substream_seed(seed, "filter_model")


def train_filter_model(cfg, splits, universe):
    """NIP-trained item table used as the ``trained`` similarity provider."""
    tc = replace(cfg.train_config(), seed=filter_model_seed(cfg.seed))
    return train_nip(splits["train"], tc, item_ids=universe)


def resolve_filter_matrix(cfg, catalog=None, model_dir=None):
    if cfg.provider == "file":
        if not cfg.vectors:
            raise ConfigError("provider=file needs a vectors path")
        return embed_from_file(_existing(cfg.vectors))
    if cfg.provider == "tfidf":
        if catalog is None:
            raise ConfigError("provider=tfidf needs a catalog")
        return embed_tfidf(catalog, TFIDF_DIM, cfg.seed)
    model_dir = model_dir or cfg.model
    if not model_dir:
        raise ConfigError("provider=trained needs a model directory holding filter.cgv")
    _existing(Path(model_dir) / "filter.cgv")
    return TrainableModel.load(model_dir, "filter").item_table


def _existing(path):
    if not Path(path).exists():
        raise ConfigError(f"file not found: {path}")
    return path


def train_models(cfg, splits, catalog=None, filter_matrix=None):
    """Train the recommender (and the filter model when ``provider=trained``).

    Returns ``(recommender, filter_model_or_None)``.
    """
    universe = split_universe(splits)
    filter_model = None
    if cfg.filter and filter_matrix is None:
        if cfg.provider == "trained":
            filter_model = train_filter_model(cfg, splits, universe)
            filter_matrix = filter_model.item_table
        else:
            filter_matrix = resolve_filter_matrix(cfg, catalog)
    fc = FilterConfig(cfg.filter, cfg.tau)
    model = train_recommender(splits["train"], fc, cfg.train_config(), filter_matrix, item_ids=universe)
    return model, filter_model


@dataclass
class Evaluation:
    report: object
    similarity: object
    rankings: list


def evaluate(cfg, examples, rec_matrix, filter_matrix=None):
    """Rank each example's target over ``rec_matrix`` and aggregate.

    Contexts are denoised with ``filter_matrix`` when ``cfg.filter`` is set.
    The similarity analysis uses ``filter_matrix`` (or ``rec_matrix``).
    """
    mode = "filtered" if cfg.filter else "raw"
    fm = filter_matrix if filter_matrix is not None else rec_matrix

    def one(ex):
        return rank_target(ex.context, ex.target, rec_matrix, mode, cfg.tau, fm, ex.user_id,
                           mask_history=cfg.mask_history)

    rankings = ordered_map(one, examples)
    report = aggregate(rankings, cfg.ks)
    raw = {ex.user_id: list(ex.context) for ex in examples}
    filtered = {ex.user_id: prepare_context(ex.context, mode, cfg.tau, fm) for ex in examples}
    targets = {ex.user_id: ex.target for ex in examples}
    sim = similarity_report(raw, filtered, fm, targets)
    return Evaluation(report, sim, rankings)


def write_report(evaluation, out_dir):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    body = evaluation.report.to_dict()
    body["similarity"] = evaluation.similarity.means()
    report_path = out_dir / "report.json"
    report_path.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")
    sim_path = out_dir / "similarity.csv"
    evaluation.similarity.write_csv(sim_path)
    return report_path, sim_path


def sweep(cfg, splits, catalog=None, taus=SWEEP_TAUS, filter_matrix=None):
    """Filter, train and evaluate at each threshold; one metrics row per tau."""
    universe = split_universe(splits)
    if filter_matrix is None:
        if cfg.provider == "trained":
            filter_matrix = train_filter_model(cfg, splits, universe).item_table
        else:
            filter_matrix = resolve_filter_matrix(cfg, catalog)
    rows = []
    for tau in taus:
        run = replace(cfg, tau=float(tau), filter=True)
        model, _ = train_models(run, splits, filter_matrix=filter_matrix)
        ev = evaluate(run, splits[cfg.split], model.item_table, filter_matrix)
        rows.append((float(tau), ev.report.metrics))
        log.info("tau=%s %s", tau, ev.report.metrics)
    return rows


def write_sweep_csv(rows, path, ks=(10, 20)):
    names = metric_names(ks)
    with open(path, "w", encoding="utf-8") as f:
        f.write(",".join(["tau"] + names) + "\n")
        for tau, metrics in rows:
            f.write(",".join([repr(tau)] + [repr(float(metrics[n])) for n in names]) + "\n")


def raw_pipeline_metrics(cfg, splits):
    """Metrics of the unfiltered pipeline, the reference for the sweep's guard."""
    run = replace(cfg, filter=False)
    model, _ = train_models(run, splits)
    return evaluate(run, splits[cfg.split], model.item_table).report.metrics


def as_array(metrics, ks=(10, 20)):
    return np.array([metrics[n] for n in metric_names(ks)])
