"""Embedding matrices and their on-disk formats (TSV text and CGV1 binary)."""

import struct
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, DuplicateItem, ParseError, UnknownItem

MAGIC = b"CGV1"


class EmbeddingMatrix:
    """Row vectors keyed by item id.

    ``flagged`` lists items whose vector is degenerate (e.g. the zero vector
    produced for an item with no text).
    """

    def __init__(self, ids, vectors, flagged=()):
        vectors = np.asarray(vectors)
        ids = [str(i) for i in ids]
        if vectors.ndim != 2 or vectors.shape[0] != len(ids):
            raise ValueError(f"expected ({len(ids)}, dim) array, got shape {vectors.shape}")
        if vectors.shape[1] < 1:
            raise ValueError("dim must be positive")
        self.ids = ids
        self.vectors = vectors
        self.index = {}
        for row, item_id in enumerate(ids):
            if item_id in self.index:
                raise DuplicateItem(item_id)
            self.index[item_id] = row
        self.flagged = tuple(flagged)

    @property
    def dim(self):
        return self.vectors.shape[1]

    def __len__(self):
        return len(self.ids)

    def __contains__(self, item_id):
        return item_id in self.index

    def rows(self, item_ids):
        try:
            return np.fromiter((self.index[i] for i in item_ids), dtype=np.intp)
        except KeyError as exc:
            raise UnknownItem(exc.args[0]) from None

    def get(self, item_ids):
        return self.vectors[self.rows(item_ids)]

    def __getitem__(self, item_id):
        return self.get([item_id])[0]

    def subset(self, item_ids):
        item_ids = list(item_ids)
        flagged = [i for i in self.flagged if i in set(item_ids)]
        return EmbeddingMatrix(item_ids, self.get(item_ids).copy(), flagged)

    def normalized(self):
        norms = np.linalg.norm(self.vectors, axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(norms > 0, self.vectors / np.where(norms > 0, norms, 1.0), 0.0)
        return EmbeddingMatrix(self.ids, out, self.flagged)

    def is_normalized(self, atol=1e-6):
        return bool(np.all(np.abs(np.linalg.norm(self.vectors, axis=1) - 1.0) <= atol))

    def __eq__(self, other):
        return (isinstance(other, EmbeddingMatrix) and self.ids == other.ids
                and self.vectors.shape == other.vectors.shape
                and np.array_equal(self.vectors, other.vectors))

    def __repr__(self):
        return f"EmbeddingMatrix(n={len(self)}, dim={self.dim})"


def read_tsv(path):
    ids, rows, width = [], [], None
    seen = set()
    with Path(path).open(encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            fields = line.split("\t")
            item_id, values = fields[0], fields[1:]
            try:
                vec = [float(v) for v in values]
            except ValueError as exc:
                raise ParseError(line_no, str(exc), str(path)) from None
            if width is None:
                width = len(vec)
            elif len(vec) != width:
                raise DimensionMismatch(line_no, width, len(vec))
            if item_id in seen:
                raise DuplicateItem(item_id)
            seen.add(item_id)
            ids.append(item_id)
            rows.append(vec)
    if not ids or not width:
        raise ParseError(0, "no vectors", str(path))
    return EmbeddingMatrix(ids, np.array(rows, dtype=np.float64))


def write_tsv(matrix, path):
    with Path(path).open("w", encoding="utf-8") as f:
        for item_id, vec in zip(matrix.ids, matrix.vectors):
            f.write(item_id + "\t" + "\t".join(repr(float(x)) for x in vec) + "\n")


def write_binary(matrix, path):
    with Path(path).open("wb") as f:
        f.write(MAGIC + struct.pack("<II", matrix.dim, len(matrix)))
        data = np.ascontiguousarray(matrix.vectors, dtype="<f4")
        for item_id, vec in zip(matrix.ids, data):
            raw = item_id.encode("utf-8")
            f.write(struct.pack("<H", len(raw)) + raw + vec.tobytes())


def read_binary(path):
    blob = Path(path).read_bytes()
    if blob[:4] != MAGIC:
        raise ParseError(0, "bad magic", str(path))
    dim, count = struct.unpack_from("<II", blob, 4)
    pos, ids, rows = 12, [], []
    try:
        for _ in range(count):
            (n,) = struct.unpack_from("<H", blob, pos)
            pos += 2
            ids.append(blob[pos:pos + n].decode("utf-8"))
            pos += n
            rows.append(np.frombuffer(blob, dtype="<f4", count=dim, offset=pos))
            pos += 4 * dim
    except (struct.error, ValueError) as exc:
        raise ParseError(len(ids) + 1, f"truncated record: {exc}", str(path)) from None
    if pos != len(blob):
        raise ParseError(count, "trailing bytes", str(path))
    return EmbeddingMatrix(ids, np.array(rows, dtype=np.float64).reshape(count, dim))


def embed_from_file(path):
    """Load vectors exactly as stored; no normalization."""
    path = Path(path)
    with path.open("rb") as f:
        head = f.read(4)
    return read_binary(path) if head == MAGIC else read_tsv(path)
