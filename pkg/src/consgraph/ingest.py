"""Interaction-log loading, k-core filtering and leave-one-out splits."""

import json
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path

from .catalog import InteractionHistory, load_catalog
from .errors import EmptyDataset, HistoryTooShort, ParseError, UnknownItem

SPLITS = ("train", "dev", "test")


@dataclass(frozen=True)
class Dataset:
    catalog: dict
    histories: dict

    def item_universe(self):
        """Sorted ids of items that occur in at least one history."""
        return sorted({i for h in self.histories.values() for i in h.item_ids})

    def n_events(self):
        return sum(len(h) for h in self.histories.values())


@dataclass(frozen=True)
class SplitExample:
    user_id: str
    context: tuple
    target: str
    split: str

    def to_json(self):
        return json.dumps(
            {"user_id": self.user_id, "context": list(self.context), "target": self.target,
             "split": self.split},
            ensure_ascii=False,
        )

    @classmethod
    def from_dict(cls, obj):
        return cls(obj["user_id"], tuple(obj["context"]), obj["target"], obj["split"])


def build_dataset(catalog, rows):
    """Group ``(user_id, item_id, timestamp)`` rows into per-user histories."""
    grouped = defaultdict(list)
    for user_id, item_id, ts in rows:
        if item_id not in catalog:
            raise UnknownItem(item_id)
        grouped[user_id].append((item_id, ts))
    histories = {u: InteractionHistory(u, tuple(ev)) for u, ev in grouped.items()}
    return Dataset(catalog, histories)


def read_log(path):
    rows = []
    with Path(path).open(encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                ts = obj["timestamp"]
                if isinstance(ts, bool) or not isinstance(ts, int):
                    raise TypeError("timestamp must be an integer")
                rows.append((str(obj["user_id"]), str(obj["item_id"]), ts))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ParseError(line_no, str(exc), str(path)) from None
    return rows


def load_interactions(log_path, catalog_path):
    catalog = load_catalog(catalog_path)
    return build_dataset(catalog, read_log(log_path))


def core_filter(ds, min_count=5):
    """Drop users and items with fewer than ``min_count`` events, repeating
    until nothing changes. Counts are over events, so repeats count."""
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    events = {u: list(h.events) for u, h in ds.histories.items()}
    while True:
        item_counts = Counter(i for ev in events.values() for i, _ in ev)
        kept = {}
        for u, ev in events.items():
            ev = [e for e in ev if item_counts[e[0]] >= min_count]
            if len(ev) >= min_count:
                kept[u] = ev
        changed = kept.keys() != events.keys() or any(len(kept[u]) != len(events[u]) for u in kept)
        events = kept
        if not changed:
            break
    if not events:
        raise EmptyDataset(f"no users survive {min_count}-core filtering")
    histories = {u: ds.histories[u] if len(ev) == len(ds.histories[u]) else InteractionHistory(u, tuple(ev))
                 for u, ev in events.items()}
    return Dataset(ds.catalog, histories)


def leave_one_out(ds):
    """Per user with history v_1..v_t: test predicts v_t, dev predicts v_{t-1},
    train predicts every v_i with 1 < i < t-1 from v_1..v_{i-1}.

    Output is ordered by user id, then target position.
    """
    out = []
    for user_id in sorted(ds.histories):
        items = ds.histories[user_id].item_ids
        t = len(items)
        if t < 3:
            raise HistoryTooShort(user_id, t)
        for pos in range(1, t):  # 0-based target position
            tag = "test" if pos == t - 1 else "dev" if pos == t - 2 else "train"
            out.append(SplitExample(user_id, tuple(items[:pos]), items[pos], tag))
    return out


def partition(examples):
    parts = {s: [] for s in SPLITS}
    for ex in examples:
        parts[ex.split].append(ex)
    return parts


def write_splits(examples, out_dir):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {}
    for split, rows in partition(examples).items():
        path = out_dir / f"{split}.jsonl"
        with path.open("w", encoding="utf-8") as f:
            for ex in rows:
                f.write(ex.to_json() + "\n")
        paths[split] = path
    return paths


def read_split(path):
    rows = []
    with Path(path).open(encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rows.append(SplitExample.from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ParseError(line_no, str(exc), str(path)) from None
    return rows


def read_splits(splits_dir):
    splits_dir = Path(splits_dir)
    return {s: read_split(splits_dir / f"{s}.jsonl") for s in SPLITS}
