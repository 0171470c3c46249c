"""Exact nearest-neighbour index over motion signatures."""

from __future__ import annotations

import struct
import time
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import LoadError, ShapeError, ValidationError

INDEX_MAGIC = b"MSIGIDX\x00"
INDEX_VERSION = 1


@dataclass(frozen=True)
class Hit:
    id: str
    distance: float
    class_label: Optional[int] = None


_BLOCK = 512


class EmbeddingIndex:
    """Immutable id -> signature map with exhaustive Euclidean search.

    Signatures are held as float32 (the on-disk precision); distances are
    computed in float64. Equal distances are ordered by ascending id.
    """

    def __init__(self, dim: int, ids: Sequence[str] = (), vectors=None, labels: Sequence[Optional[int]] = None,
                 metadata: Optional[dict] = None):
        if dim < 1:
            raise ValidationError("index dimension must be positive")
        ids = list(ids)
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise ValidationError(f"duplicate ids in index: {dup[:5]}")
        vecs = np.zeros((0, dim), dtype=np.float32) if vectors is None else np.asarray(vectors, dtype=np.float32)
        if vecs.ndim != 2 or vecs.shape != (len(ids), dim):
            raise ShapeError(f"expected vectors of shape {(len(ids), dim)}, got {vecs.shape}")
        if not np.all(np.isfinite(vecs)):
            raise ValidationError("index vectors must be finite")
        labels = [None] * len(ids) if labels is None else list(labels)
        if len(labels) != len(ids):
            raise ValidationError("labels length differs from ids")
        self.dim = dim
        self.ids = ids
        self.vectors = vecs
        self.vectors.setflags(write=False)
        self.labels = [None if l is None else int(l) for l in labels]
        self.metadata = dict(metadata or {})
        self._v64 = vecs.astype(np.float64)
        order = sorted(range(len(ids)), key=ids.__getitem__)
        self._id_rank = np.empty(len(ids), dtype=np.int64)
        self._id_rank[order] = np.arange(len(ids))
        self._pos = {i: k for k, i in enumerate(ids)}

    def __len__(self) -> int:
        return len(self.ids)

    def label_of(self, id: str) -> Optional[int]:
        return self.labels[self._pos[id]]

    def vector_of(self, id: str) -> np.ndarray:
        return self.vectors[self._pos[id]]

    def distances(self, sig) -> np.ndarray:
        q = np.asarray(sig, dtype=np.float32)
        if q.shape != (self.dim,):
            raise ShapeError(f"query has shape {q.shape}, index dim is {self.dim}")
        q64 = q.astype(np.float64)
        out = np.empty(len(self.ids))
        # blocks keep the difference array cache-sized
        for s in range(0, len(out), _BLOCK):
            diff = self._v64[s : s + _BLOCK] - q64
            out[s : s + _BLOCK] = np.einsum("ij,ij->i", diff, diff)
        return np.sqrt(out)

    def query(self, sig, k: int = 10, exclude: Optional[str] = None) -> list[Hit]:
        """The k nearest entries, optionally leaving out one id (leave-one-out)."""
        if k < 1:
            raise ValidationError("k must be at least 1")
        d = self.distances(sig)
        need = k + (exclude is not None)
        if need < len(d):
            # everything tied with the need-th distance stays in play for the id tie-break
            cutoff = np.partition(d, need - 1)[need - 1]
            cand = np.flatnonzero(d <= cutoff)
        else:
            cand = np.arange(len(d))
        order = cand[np.lexsort((self._id_rank[cand], d[cand]))]
        hits = []
        for i in order:
            if exclude is not None and self.ids[i] == exclude:
                continue
            hits.append(Hit(self.ids[i], float(d[i]), self.labels[i]))
            if len(hits) == k:
                break
        return hits

    def ranking(self, sig, exclude: Optional[str] = None) -> list[Hit]:
        return self.query(sig, max(len(self), 1), exclude)


def query(index: EmbeddingIndex, sig, k: int = 10) -> list[Hit]:
    return index.query(sig, k)


def build_index(model, sequences, with_mask: Optional[bool] = None) -> EmbeddingIndex:
    """Encode every sequence (one at a time) and index it under its id."""
    from .features import build_encoder_input
    from .model import encode_many

    ids = [s.id for s in sequences]
    if len(set(ids)) != len(ids):
        dup = sorted({i for i in ids if ids.count(i) > 1})
        raise ValidationError(f"duplicate ids: {dup[:5]}")
    if with_mask is None:
        with_mask = model.config.input_width == 7 * sequences[0].joint_count if sequences else False
    sigs = encode_many(model, [build_encoder_input(s, with_mask) for s in sequences])
    return EmbeddingIndex(model.config.embedding_dim, ids, sigs, [s.class_label for s in sequences])


# -- file format --------------------------------------------------------------
#
# magic(8) | u32 version | u32 dim | u32 count | per entry: u32 id_len, utf-8 id,
#   u8 has_label, i32 label, dim float32 LE | u32 crc32 of everything before it


def save_index(index: EmbeddingIndex, path) -> None:
    buf = bytearray(INDEX_MAGIC)
    buf += struct.pack("<III", INDEX_VERSION, index.dim, len(index))
    for i, vec, lab in zip(index.ids, index.vectors, index.labels):
        raw = i.encode("utf-8")
        buf += struct.pack("<I", len(raw)) + raw
        buf += struct.pack("<Bi", lab is not None, 0 if lab is None else lab)
        buf += vec.astype("<f4").tobytes()
    buf += struct.pack("<I", zlib.crc32(bytes(buf)))
    Path(path).write_bytes(bytes(buf))


def load_index(path) -> EmbeddingIndex:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise LoadError(str(exc)) from None
    if len(data) < 24 or data[:8] != INDEX_MAGIC:
        raise LoadError(f"{path}: not an index file")
    version, dim, count = struct.unpack_from("<III", data, 8)
    if version != INDEX_VERSION:
        raise LoadError(f"{path}: unsupported index version {version}")
    (crc,) = struct.unpack_from("<I", data, len(data) - 4)
    if zlib.crc32(data[:-4]) != crc:
        raise LoadError(f"{path}: checksum mismatch (truncated or corrupt)")
    end = len(data) - 4
    off = 20
    ids, vecs, labels = [], [], []
    try:
        for _ in range(count):
            (n,) = struct.unpack_from("<I", data, off)
            off += 4
            if off + n > end:
                raise LoadError(f"{path}: truncated entry id")
            ids.append(data[off : off + n].decode("utf-8"))
            off += n
            has, lab = struct.unpack_from("<Bi", data, off)
            off += 5
            if off + 4 * dim > end:
                raise LoadError(f"{path}: truncated vector payload")
            vecs.append(np.frombuffer(data, dtype="<f4", count=dim, offset=off))
            off += 4 * dim
            labels.append(lab if has else None)
    except struct.error:
        raise LoadError(f"{path}: header count {count} exceeds payload") from None
    if off != end:
        raise LoadError(f"{path}: header count {count} does not match payload size")
    vectors = np.array(vecs, dtype=np.float32).reshape(count, dim)
    return EmbeddingIndex(dim, ids, vectors, labels)


@dataclass(frozen=True)
class LatencyStats:
    mean_ms: float
    p95_ms: float
    per_query_ms: np.ndarray
    index_size: int


def benchmark_query_latency(index: EmbeddingIndex, queries, k: int = 10, repeats: int = 1) -> LatencyStats:
    """Wall-clock time of :meth:`EmbeddingIndex.query`, per query, in milliseconds."""
    queries = list(queries)
    if not queries:
        raise ValidationError("latency benchmark needs at least one query")
    if len(index) == 0:
        raise ValidationError("latency benchmark needs a non-empty index")
    times = []
    for _ in range(repeats):
        for q in queries:
            t0 = time.perf_counter()
            index.query(q, k)
            times.append((time.perf_counter() - t0) * 1e3)
    per = np.array(times)
    return LatencyStats(float(per.mean()), float(np.percentile(per, 95)), per, len(index))
