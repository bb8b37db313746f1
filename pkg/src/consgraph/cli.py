"""Command line: ``consgraph {ingest,filter,train,rank,eval,synth,sweep}``.

Exit codes: 0 ok, 1 usage or configuration error, 2 data error,
3 numeric failure.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

from . import pipeline
from .catalog import dump_catalog, load_catalog
from .config import PROVIDERS, RunConfig, load_config
from .embed import TrainableModel
from .errors import ConfigError, DataError, NumericError
from .evaluation import EvalReport, compare_reports
from .graph import filter_report
from .ingest import core_filter, leave_one_out, load_interactions, partition, read_splits, write_splits
from .synth import NoisyCorpusConfig, gen_noisy_corpus
from .vectors import write_tsv

log = logging.getLogger("consgraph")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _common(p):
    p.add_argument("--config", help="key = value config file; flags override it")
    p.add_argument("--catalog")
    p.add_argument("--log")
    p.add_argument("--vectors")
    p.add_argument("--splits", help="directory with train/dev/test.jsonl")
    p.add_argument("--model", help="directory holding model.cgv (and filter.cgv)")
    p.add_argument("--out", dest="out_dir")
    p.add_argument("--tau", type=float)
    p.add_argument("--provider", choices=PROVIDERS)
    p.add_argument("--dim", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--temperature", type=float)
    p.add_argument("--ks", type=lambda s: tuple(int(x) for x in s.split(",")))
    p.add_argument("--min-count", type=int)
    p.add_argument("--split", choices=("train", "dev", "test"))
    p.add_argument("--resamples", type=int)
    p.add_argument("--exclude-last", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--mask-history", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--filter", action=argparse.BooleanOptionalAction, default=None,
                   help="denoise contexts with the maximum connected component")


def build_parser():
    parser = _Parser(prog="consgraph", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_ in [
        ("ingest", "core-filter a log and write leave-one-out splits"),
        ("filter", "report retained/removed items per user"),
        ("train", "train the recommender on raw or denoised contexts"),
        ("rank", "write full-catalog rankings for one split"),
        ("eval", "Recall/NDCG report and similarity analysis"),
        ("synth", "generate a noisy synthetic corpus"),
        ("sweep", "metrics across a grid of thresholds"),
    ]:
        p = sub.add_parser(name, help=help_)
        _common(p)
        if name == "eval":
            p.add_argument("--baseline", help="report.json to test against (paired permutation)")
        if name == "sweep":
            p.add_argument("--taus", type=lambda s: tuple(float(x) for x in s.split(",")),
                           default=pipeline.SWEEP_TAUS)
        if name == "synth":
            d = NoisyCorpusConfig()
            p.add_argument("--n-users", type=int, default=d.n_users)
            p.add_argument("--n-clusters", type=int, default=d.n_clusters)
            p.add_argument("--items-per-cluster", type=int, default=d.items_per_cluster)
            p.add_argument("--history-len", type=int, default=d.history_len)
            p.add_argument("--noise-rate", type=float, default=d.noise_rate)
            p.add_argument("--spread", type=float, default=d.spread)
    return parser


def resolve_config(args):
    cfg = load_config(args.config) if args.config else RunConfig()
    keys = [k for k in RunConfig.__dataclass_fields__ if hasattr(args, k)]
    return cfg.override(**{k: getattr(args, k) for k in keys}).validate()


def _require(cfg, *names):
    for name in names:
        value = getattr(cfg, name)
        if not value:
            raise ConfigError(f"--{name.replace('_', '-')} is required")
        if name != "out_dir" and not Path(value).exists():
            raise ConfigError(f"{name} path does not exist: {value}")


def _out(cfg):
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(cfg.to_text())
    return out


def cmd_ingest(cfg, args):
    _require(cfg, "catalog", "log")
    ds = core_filter(load_interactions(cfg.log, cfg.catalog), cfg.min_count)
    examples = leave_one_out(ds)
    out = _out(cfg)
    paths = write_splits(examples, out)
    dump_catalog({i: ds.catalog[i] for i in ds.item_universe()}, out / "catalog.jsonl")
    counts = {s: len(rows) for s, rows in partition(examples).items()}
    counts.update(users=len(ds.histories), items=len(ds.item_universe()), events=ds.n_events())
    pipeline.write_manifest(out, cfg, [*paths.values(), out / "catalog.jsonl"],
                            inputs=[cfg.catalog, cfg.log], extra={"counts": counts})
    log.info("ingest: %s", counts)


def cmd_filter(cfg, args):
    _require(cfg, "catalog", "log")
    ds = load_interactions(cfg.log, cfg.catalog)
    matrix = pipeline.resolve_filter_matrix(cfg, ds.catalog)
    out = _out(cfg)
    users = [u for u in sorted(ds.histories) if len(ds.histories[u]) > int(cfg.exclude_last)]
    skipped = len(ds.histories) - len(users)
    if skipped:
        log.warning("filter: skipped %d users with nothing left after holding out the last event", skipped)
    records = pipeline.ordered_map(
        lambda u: filter_report(u, ds.histories[u], matrix, cfg.tau, cfg.exclude_last), users)
    path = out / "filter.jsonl"
    with path.open("w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec, ensure_ascii=False) + "\n")
    pipeline.write_manifest(out, cfg, [path], inputs=[cfg.catalog, cfg.log])


def _load_splits(cfg):
    _require(cfg, "splits")
    return read_splits(cfg.splits)


def _catalog(cfg):
    if cfg.catalog:
        _require(cfg, "catalog")
        return load_catalog(cfg.catalog)
    fallback = Path(cfg.splits) / "catalog.jsonl" if cfg.splits else None
    return load_catalog(fallback) if fallback and fallback.exists() else None


def cmd_train(cfg, args):
    splits = _load_splits(cfg)
    model, filter_model = pipeline.train_models(cfg, splits, _catalog(cfg))
    out = _out(cfg)
    model.save(out, "model")
    files = [out / "model.cgv", out / "model.json"]
    if filter_model is not None:
        filter_model.save(out, "filter")
        files += [out / "filter.cgv", out / "filter.json"]
    pipeline.write_manifest(out, cfg, files, extra={"loss_trace": model.loss_trace})


def _matrices(cfg, splits):
    """(recommender matrix, filter matrix); zero-shot when no model is given."""
    universe = pipeline.split_universe(splits)
    catalog = _catalog(cfg)
    if cfg.model:
        _require(cfg, "model")
        rec = TrainableModel.load(cfg.model, "model").item_table
        fm = pipeline.resolve_filter_matrix(cfg, catalog) if cfg.filter else None
        return rec.subset(universe), fm
    if cfg.provider == "trained":
        raise ConfigError("provider=trained needs --model")
    fm = pipeline.resolve_filter_matrix(cfg, catalog)
    return fm.subset(universe), fm


def cmd_rank(cfg, args):
    splits = _load_splits(cfg)
    rec, fm = _matrices(cfg, splits)
    ev = pipeline.evaluate(cfg, splits[cfg.split], rec, fm)
    out = _out(cfg)
    path = out / "rank.jsonl"
    with path.open("w", encoding="utf-8") as f:
        for r in ev.rankings:
            f.write(json.dumps(r.to_dict(), ensure_ascii=False) + "\n")
    pipeline.write_manifest(out, cfg, [path])


def cmd_eval(cfg, args):
    splits = _load_splits(cfg)
    rec, fm = _matrices(cfg, splits)
    ev = pipeline.evaluate(cfg, splits[cfg.split], rec, fm)
    if args.baseline:
        _require_file(args.baseline)
        base = EvalReport.from_dict(json.loads(Path(args.baseline).read_text()))
        ev.report.significance = compare_reports(ev.report, base, Path(args.baseline).parent.name or "baseline",
                                                 cfg.resamples, cfg.seed)
    out = _out(cfg)
    paths = pipeline.write_report(ev, out)
    pipeline.write_manifest(out, cfg, paths)
    log.info("eval: %s", ev.report.metrics)


def _require_file(path):
    if not Path(path).exists():
        raise ConfigError(f"file not found: {path}")


def cmd_synth(cfg, args):
    ncfg = NoisyCorpusConfig(args.n_users, args.n_clusters, args.items_per_cluster, args.history_len,
                             args.noise_rate, cfg.dim, cfg.seed, args.spread)
    corpus = gen_noisy_corpus(ncfg)
    out = _out(cfg)
    dump_catalog(corpus.dataset.catalog, out / "catalog.jsonl")
    with (out / "interactions.jsonl").open("w", encoding="utf-8") as f:
        for user_id in sorted(corpus.dataset.histories):
            for item_id, ts in corpus.dataset.histories[user_id].events:
                f.write(json.dumps({"user_id": user_id, "item_id": item_id, "timestamp": ts}) + "\n")
    truth = {u: sorted(s) for u, s in sorted(corpus.ground_truth.items())}
    (out / "ground_truth.json").write_text(json.dumps(truth, indent=1, sort_keys=True) + "\n")
    write_tsv(corpus.embeddings, out / "vectors.tsv")
    names = ["catalog.jsonl", "interactions.jsonl", "ground_truth.json", "vectors.tsv"]
    pipeline.write_manifest(out, cfg, [out / n for n in names])


def cmd_sweep(cfg, args):
    splits = _load_splits(cfg)
    rows = pipeline.sweep(cfg, splits, _catalog(cfg), args.taus)
    out = _out(cfg)
    path = out / "sweep.csv"
    pipeline.write_sweep_csv(rows, path, cfg.ks)
    pipeline.write_manifest(out, cfg, [path])


COMMANDS = {"ingest": cmd_ingest, "filter": cmd_filter, "train": cmd_train, "rank": cmd_rank,
            "eval": cmd_eval, "synth": cmd_synth, "sweep": cmd_sweep}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"consgraph: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, FileNotFoundError) as exc:
        print(f"consgraph: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"consgraph: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
