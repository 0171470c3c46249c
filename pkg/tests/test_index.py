import struct

import numpy as np
import pytest

from motionsig.errors import LoadError, ShapeError, ValidationError
from motionsig.index import EmbeddingIndex, benchmark_query_latency, build_index, load_index, save_index
from motionsig.model import EncoderConfig, build_encoder

from conftest import random_sequence
from oracles import scan_oracle


def random_index(rng, n=200, dim=16, dup=10):
    vecs = rng.normal(size=(n, dim))
    # exact duplicates under different ids exercise the tie rule
    vecs[n - dup :] = vecs[:dup]
    ids = [f"e{int(x):05d}" for x in rng.permutation(n)]
    return ids, vecs


def test_self_retrieval_and_clamp(rng):
    ids, vecs = random_index(rng, 30, 8, dup=0)
    idx = EmbeddingIndex(8, ids, vecs, list(range(30)))
    hits = idx.query(vecs[5], 3)
    assert hits[0].id == ids[5] and hits[0].distance == 0.0 and hits[0].class_label == 5
    assert len(idx.query(vecs[0], 100)) == 30
    d = [h.distance for h in idx.query(vecs[0], 30)]
    assert d == sorted(d)


def test_empty_index_queryable():
    idx = EmbeddingIndex(4)
    assert idx.query(np.zeros(4), 1) == []


def test_errors(rng):
    idx = EmbeddingIndex(4, ["a"], rng.normal(size=(1, 4)))
    with pytest.raises(ShapeError):
        idx.query(np.zeros(5), 1)
    with pytest.raises(ValidationError):
        idx.query(np.zeros(4), 0)
    with pytest.raises(ValidationError):
        EmbeddingIndex(4, ["a", "a"], rng.normal(size=(2, 4)))


def test_matches_oracle_with_ties(rng):
    ids, vecs = random_index(rng)
    idx = EmbeddingIndex(16, ids, vecs)
    for q in list(vecs[:10]) + list(rng.normal(size=(20, 16))):
        assert [h.id for h in idx.query(q, 15)] == scan_oracle(ids, vecs, q, 15)


def test_insertion_order_does_not_matter(rng):
    ids, vecs = random_index(rng, 50, 6)
    perm = rng.permutation(50)
    a = EmbeddingIndex(6, ids, vecs)
    b = EmbeddingIndex(6, [ids[i] for i in perm], vecs[perm])
    for q in rng.normal(size=(10, 6)):
        assert a.query(q, 50) == b.query(q, 50)


def test_leave_one_out(rng):
    ids, vecs = random_index(rng, 20, 4, dup=0)
    idx = EmbeddingIndex(4, ids, vecs)
    hits = idx.query(vecs[3], 5, exclude=ids[3])
    assert ids[3] not in [h.id for h in hits] and len(hits) == 5


def test_save_load_roundtrip(tmp_path, rng):
    ids, vecs = random_index(rng, 40, 12)
    labels = [int(x) if x % 3 else None for x in range(40)]
    idx = EmbeddingIndex(12, ids, vecs, labels)
    save_index(idx, tmp_path / "i.bin")
    back = load_index(tmp_path / "i.bin")
    assert back.ids == idx.ids and back.labels == idx.labels
    np.testing.assert_array_equal(back.vectors, idx.vectors)
    for q in rng.normal(size=(5, 12)):
        assert back.query(q, 40) == idx.query(q, 40)


def test_load_rejects_truncation_and_count_mismatch(tmp_path, rng):
    ids, vecs = random_index(rng, 10, 4, dup=0)
    save_index(EmbeddingIndex(4, ids, vecs), tmp_path / "i.bin")
    data = (tmp_path / "i.bin").read_bytes()
    (tmp_path / "t.bin").write_bytes(data[:-30])
    with pytest.raises(LoadError):
        load_index(tmp_path / "t.bin")
    # rewrite the count field and re-seal the checksum so only the count is wrong
    import zlib
    body = bytearray(data[:-4])
    struct.pack_into("<I", body, 16, 11)
    (tmp_path / "c.bin").write_bytes(bytes(body) + struct.pack("<I", zlib.crc32(bytes(body))))
    with pytest.raises(LoadError):
        load_index(tmp_path / "c.bin")
    body = bytearray(data[:-4])
    struct.pack_into("<I", body, 16, 9)
    (tmp_path / "d.bin").write_bytes(bytes(body) + struct.pack("<I", zlib.crc32(bytes(body))))
    with pytest.raises(LoadError):
        load_index(tmp_path / "d.bin")


def test_build_index_deterministic(rng):
    seqs = [random_sequence(rng, J=3, N=int(rng.integers(2, 9)), id=f"s{i}", label=i % 2) for i in range(6)]
    topo = seqs[0].topology
    seqs = [s.replace(topology=topo) for s in seqs]
    model = build_encoder(EncoderConfig(18, 8, 1, 5), 0)
    a, b = build_index(model, seqs), build_index(model, seqs)
    assert len(a) == 6 and a.dim == 5
    np.testing.assert_array_equal(a.vectors, b.vectors)
    assert len(build_index(model, [])) == 0
    with pytest.raises(ValidationError):
        build_index(model, seqs + seqs[:1])


def test_latency_benchmark(rng):
    small = EmbeddingIndex(64, [str(i) for i in range(100)], rng.normal(size=(100, 64)))
    stats = benchmark_query_latency(small, rng.normal(size=(20, 64)))
    assert stats.index_size == 100 and stats.per_query_ms.shape == (20,)
    assert stats.p95_ms >= 0 and stats.mean_ms > 0
    with pytest.raises(ValidationError):
        benchmark_query_latency(small, [])


def test_latency_grows_with_index_size(rng):
    q = rng.normal(size=(100, 512))
    small = EmbeddingIndex(512, [str(i) for i in range(100)], rng.normal(size=(100, 512)))
    large = EmbeddingIndex(512, [str(i) for i in range(10_000)], rng.normal(size=(10_000, 512)))
    assert benchmark_query_latency(small, q).mean_ms < benchmark_query_latency(large, q).mean_ms


def test_ties_across_the_cutoff_resolve_by_id(rng):
    base = rng.normal(size=8)
    vecs = np.vstack([np.tile(base, (20, 1)), rng.normal(size=(30, 8)) + 5])
    ids = [f"t{i:02d}" for i in rng.permutation(50)]
    idx = EmbeddingIndex(8, ids, vecs)
    tied = sorted(ids[:20])
    assert [h.id for h in idx.query(base, 5)] == tied[:5]
    assert [h.id for h in idx.query(base, 5, exclude=tied[0])] == tied[1:6]
    assert [h.id for h in idx.query(base + 100, 3)] == scan_oracle(ids, vecs, base + 100, 3)
