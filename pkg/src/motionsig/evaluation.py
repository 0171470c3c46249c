"""Retrieval metrics: top-n accuracy, DTW per-frame error, PR curves, reports."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import MetricError, ValidationError
from .features import build_encoder_input
from .index import EmbeddingIndex
from .model import encode_many
from .motion_data import SkeletonSequence


# -- DTW ----------------------------------------------------------------------


def frame_cost_matrix(a: SkeletonSequence, b: SkeletonSequence, block: int = 64) -> np.ndarray:
    """c[i, j] = mean over joints of ||a.frames[i, joint] - b.frames[j, joint]|| (meters)."""
    if a.joint_count != b.joint_count:
        raise ValidationError(f"joint count mismatch: {a.joint_count} vs {b.joint_count}")
    fa, fb = a.frames, b.frames
    out = np.empty((fa.shape[0], fb.shape[0]))
    for s in range(0, fa.shape[0], block):
        diff = fa[s : s + block, None] - fb[None]
        out[s : s + block] = np.sqrt((diff**2).sum(axis=3)).mean(axis=2)
    return out


def dtw_accumulate(cost: np.ndarray, band: Optional[int] = None):
    """Cumulative (cost, path length) tables of the classic DTW recursion.

    Among predecessors with equal cumulative cost the shorter path wins.
    Cells outside a Sakoe-Chiba ``band`` are unreachable.
    """
    n, m = cost.shape
    D = np.full((n, m), np.inf)
    L = np.zeros((n, m), dtype=np.int64)
    allowed = None
    if band is not None:
        w = max(int(band), abs(n - m))
        ii, jj = np.indices((n, m))
        allowed = np.abs(ii - jj) <= w
    D[0, 0] = cost[0, 0]
    L[0, 0] = 1
    for d in range(1, n + m - 1):
        i = np.arange(max(0, d - m + 1), min(n - 1, d) + 1)
        j = d - i
        cand_c = np.full((3, i.size), np.inf)
        cand_l = np.zeros((3, i.size), dtype=np.int64)
        for k, (di, dj) in enumerate(((1, 1), (1, 0), (0, 1))):
            pi, pj = i - di, j - dj
            ok = (pi >= 0) & (pj >= 0)
            cand_c[k, ok] = D[pi[ok], pj[ok]]
            cand_l[k, ok] = L[pi[ok], pj[ok]]
        best = cand_c.min(axis=0)
        lens = np.where(cand_c == best, cand_l, np.iinfo(np.int64).max).min(axis=0)
        D[i, j] = best + cost[i, j]
        L[i, j] = lens + 1
        if allowed is not None:
            D[i, j] = np.where(allowed[i, j], D[i, j], np.inf)
    return D, L


def dtw_distance(a: SkeletonSequence, b: SkeletonSequence, band: Optional[int] = None) -> float:
    """Optimal-path DTW cost divided by path length, in millimetres per frame."""
    cost = frame_cost_matrix(a, b)
    D, L = dtw_accumulate(cost, band)
    return float(D[-1, -1] / L[-1, -1] * 1000.0)


# -- retrieval metrics ----------------------------------------------------------


@dataclass(frozen=True)
class LabeledQuery:
    id: str
    signature: np.ndarray
    class_label: Optional[int]


def make_queries(model, sequences: Sequence[SkeletonSequence]) -> list[LabeledQuery]:
    with_mask = bool(sequences) and model.config.input_width == 7 * sequences[0].joint_count
    sigs = encode_many(model, [build_encoder_input(s, with_mask) for s in sequences])
    return [LabeledQuery(s.id, sig, s.class_label) for s, sig in zip(sequences, sigs)]


def _require_labels(index: EmbeddingIndex, queries) -> None:
    if any(q.class_label is None for q in queries):
        raise MetricError("every query needs a class label")
    if any(l is None for l in index.labels):
        raise MetricError("every index entry needs a class label")


def topn_accuracy(index: EmbeddingIndex, queries: Sequence[LabeledQuery], n: int,
                  leave_one_out: bool = True) -> float:
    """Mean over queries of the same-class fraction among the n nearest entries.

    With ``leave_one_out`` an entry sharing the query's id is skipped.
    """
    if n < 1:
        raise ValidationError("n must be at least 1")
    _require_labels(index, queries)
    if not queries:
        return float("nan")
    total = 0.0
    for q in queries:
        hits = index.query(q.signature, n, exclude=q.id if leave_one_out else None)
        if hits:
            total += sum(h.class_label == q.class_label for h in hits) / len(hits)
    return total / len(queries)


@dataclass
class PRCurve:
    recall: np.ndarray
    precision: np.ndarray

    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.recall.tolist(), self.precision.tolist()))

    def area(self) -> float:
        """Step-wise area under precision as a function of recall."""
        r = np.concatenate([[0.0], self.recall])
        return float(np.sum(np.diff(r) * self.precision))


def pr_curve(index: EmbeddingIndex, queries: Sequence[LabeledQuery], leave_one_out: bool = True) -> PRCurve:
    """Micro-averaged precision/recall over rank cutoffs 1..K.

    Precision at cutoff k pools true positives over queries and divides by
    the number of retrieved items; recall divides by the pooled number of
    same-class entries.
    """
    _require_labels(index, queries)
    if not queries or len(index) == 0:
        return PRCurve(np.zeros(0), np.zeros(0))
    ranked = []
    relevant = 0
    for q in queries:
        hits = index.ranking(q.signature, exclude=q.id if leave_one_out else None)
        rel = np.array([h.class_label == q.class_label for h in hits], dtype=np.int64)
        ranked.append(rel)
        relevant += int(rel.sum())
    K = max(len(r) for r in ranked)
    tp = np.zeros(K)
    retrieved = np.zeros(K)
    for rel in ranked:
        c = np.cumsum(rel)
        # a query with fewer candidates keeps its final counts past its end
        full = np.concatenate([c, np.full(K - len(c), c[-1] if len(c) else 0)])
        got = np.minimum(np.arange(1, K + 1), len(rel))
        tp += full
        retrieved += got
    precision = np.divide(tp, retrieved, out=np.zeros(K), where=retrieved > 0)
    recall = tp / relevant if relevant else np.zeros(K)
    return PRCurve(recall, precision)


# -- reports ------------------------------------------------------------------


@dataclass
class QueryRow:
    query_id: str
    retrieved: list[str]
    top1_correct: bool
    topn_fraction: float
    mean_dtw_mm: float


@dataclass
class RetrievalReport:
    n: int
    rows: list[QueryRow] = field(default_factory=list)

    @property
    def top1(self) -> float:
        return float(np.mean([r.top1_correct for r in self.rows])) if self.rows else float("nan")

    @property
    def topn(self) -> float:
        return float(np.mean([r.topn_fraction for r in self.rows])) if self.rows else float("nan")

    @property
    def mean_dtw_mm(self) -> float:
        vals = [r.mean_dtw_mm for r in self.rows if not np.isnan(r.mean_dtw_mm)]
        return float(np.mean(vals)) if vals else float("nan")


def build_report(index: EmbeddingIndex, queries: Sequence[LabeledQuery], n: int = 10,
                 repository: Optional[Mapping[str, SkeletonSequence]] = None,
                 query_sequences: Optional[Mapping[str, SkeletonSequence]] = None,
                 dtw_k: Optional[int] = None, leave_one_out: bool = True) -> RetrievalReport:
    """Per-query retrieval rows, ordered by query id.

    DTW columns are filled when both the query and repository sequences are
    supplied; they average over the ``dtw_k`` (default n) nearest hits.
    """
    _require_labels(index, queries)
    dtw_k = n if dtw_k is None else dtw_k
    report = RetrievalReport(n)
    for q in sorted(queries, key=lambda q: q.id):
        hits = index.query(q.signature, n, exclude=q.id if leave_one_out else None)
        same = [h.class_label == q.class_label for h in hits]
        dtw = float("nan")
        if repository is not None and query_sequences is not None and hits:
            qs = query_sequences[q.id]
            dtw = float(np.mean([dtw_distance(qs, repository[h.id]) for h in hits[:dtw_k]]))
        report.rows.append(QueryRow(
            query_id=q.id,
            retrieved=[h.id for h in hits],
            top1_correct=bool(same[0]) if same else False,
            topn_fraction=sum(same) / len(same) if same else 0.0,
            mean_dtw_mm=dtw,
        ))
    return report


def _g(x: float) -> str:
    return f"{x:.6g}"


def emit_report(report: RetrievalReport, curve: Optional[PRCurve], out_dir, extra: Optional[dict] = None) -> list[Path]:
    """Write report.csv, pr_curve.csv and summary.txt into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "report.csv", out / "pr_curve.csv", out / "summary.txt"]
    with open(paths[0], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["query_id", "retrieved_ids", "top1_correct", f"top{report.n}_fraction", "mean_dtw_mm"])
        for r in report.rows:
            w.writerow([r.query_id, " ".join(r.retrieved), int(r.top1_correct), _g(r.topn_fraction), _g(r.mean_dtw_mm)])
    with open(paths[1], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["recall", "precision"])
        if curve is not None:
            for rc, pr in curve.points():
                w.writerow([_g(rc), _g(pr)])
    lines = [
        f"queries\t{len(report.rows)}",
        f"top1\t{_g(report.top1)}",
        f"top{report.n}\t{_g(report.topn)}",
        f"mean_dtw_mm\t{_g(report.mean_dtw_mm)}",
    ]
    if curve is not None and curve.recall.size:
        lines.append(f"pr_area\t{_g(curve.area())}")
    for k, v in (extra or {}).items():
        lines.append(f"{k}\t{_g(v) if isinstance(v, float) else v}")
    paths[2].write_text("\n".join(lines) + "\n")
    return paths
