"""Item catalog and text verbalization templates."""

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DuplicateItem, ParseError, UnknownItem

ITEM_SEP = "; "
DEFAULT_MAX_ITEMS = 32


@dataclass(frozen=True)
class ItemRecord:
    item_id: str
    attributes: tuple = ()

    def __post_init__(self):
        if not self.item_id:
            raise ValueError("item_id must be nonempty")
        object.__setattr__(self, "attributes", tuple((str(k), str(v)) for k, v in self.attributes))


@dataclass(frozen=True)
class InteractionHistory:
    """A user's events, sorted by timestamp (stable w.r.t. input order)."""

    user_id: str
    events: tuple = field(default_factory=tuple)

    def __post_init__(self):
        events = tuple((str(i), int(t)) for i, t in self.events)
        if not events:
            raise ValueError(f"history of {self.user_id!r} is empty")
        # sorted() is stable, so equal timestamps keep their input order
        object.__setattr__(self, "events", tuple(sorted(events, key=lambda e: e[1])))

    @property
    def item_ids(self):
        return [i for i, _ in self.events]

    def __len__(self):
        return len(self.events)


def verbalize_item(item, include_id=True):
    """Render ``id: <id> <name>: <value> ...``; the id segment is dropped when
    ``include_id`` is false (the ID-free form used to train item encoders)."""
    parts = [f"id: {item.item_id}"] if include_id else []
    parts.extend(f"{name}: {value}" for name, value in item.attributes)
    return " ".join(parts)


def verbalize_history(history, catalog, include_id=True, max_items=DEFAULT_MAX_ITEMS):
    """Most recent item first, joined by ``"; "``, keeping ``max_items`` events."""
    if max_items < 1:
        raise ValueError("max_items must be positive")
    ids = history.item_ids if isinstance(history, InteractionHistory) else list(history)
    texts = []
    for item_id in reversed(ids[-max_items:]):
        try:
            item = catalog[item_id]
        except KeyError:
            raise UnknownItem(item_id) from None
        texts.append(verbalize_item(item, include_id))
    return ITEM_SEP.join(texts)


def render_nip_instruction(task_name, history_text):
    return (
        f"This is {task_name} dataset. Here is the visit history list of the user: "
        f"{history_text}, recommend next item"
    )


def parse_catalog_lines(lines, path=None):
    catalog = {}
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            item = ItemRecord(obj["item_id"], [tuple(a) for a in obj.get("attributes", [])])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ParseError(line_no, str(exc), path) from None
        if item.item_id in catalog:
            raise DuplicateItem(item.item_id)
        catalog[item.item_id] = item
    return catalog


def load_catalog(path):
    path = Path(path)
    with path.open(encoding="utf-8") as f:
        return parse_catalog_lines(f, path=str(path))


def dump_catalog(catalog, path):
    with Path(path).open("w", encoding="utf-8") as f:
        for item in catalog.values():
            rec = {"item_id": item.item_id, "attributes": [list(a) for a in item.attributes]}
            f.write(json.dumps(rec, ensure_ascii=False) + "\n")
