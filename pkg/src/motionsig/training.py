"""Pair construction and the Siamese optimization loop."""

from __future__ import annotations

import copy
import csv
import enum
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import torch

from .errors import ConfigError, DatasetError, NumericalError
from .features import (
    PairLabel,
    build_encoder_input,
    calibrate_thresholds,
    label_from_score,
    similarity_matrix,
    trajectory_summary,
)
from .index import EmbeddingIndex
from .model import EncoderConfig, LossConfig, PairBatch, batch_loss, build_encoder, encode_many
from .motion_data import SkeletonSequence, speed_double, speed_half

log = logging.getLogger(__name__)


class Regime(str, enum.Enum):
    SUPERVISED = "supervised"
    SELF_SUPERVISED = "self"


class PairSource(str, enum.Enum):
    CLASS_LABELS = "class"
    TRAJECTORY = "trajectory"
    AUGMENTATION = "augmentation"


@dataclass(frozen=True)
class PairSample:
    seq_a_id: str
    seq_b_id: str
    label: PairLabel
    source: PairSource


@dataclass(frozen=True)
class TrainConfig:
    regime: Regime = Regime.SELF_SUPERVISED
    batch_size: int = 8
    learning_rate: float = 1e-3
    max_epochs: int = 50
    seed: int = 0
    betas: tuple[float, float] = (0.9, 0.999)
    loss: LossConfig = field(default_factory=LossConfig)
    patience: int = 10
    val_fraction: float = 0.1
    sim_percentiles: tuple[float, float] = (10.0, 50.0)
    calibration_pairs: int = 1000
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "regime", Regime(self.regime))
        if self.batch_size < 1:
            raise ConfigError("batch_size must be at least 1")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        if self.max_epochs < 0:
            raise ConfigError("max_epochs must be non-negative")


@dataclass
class EpochRecord:
    epoch: int
    mean_contrastive: float
    mean_classification: float
    val_top1: float
    wall_seconds: float


@dataclass
class TrainingLog:
    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: Optional[int] = None
    thresholds: Optional[tuple[float, float]] = None

    def write_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "mean_contrastive", "mean_classification", "val_top1", "wall_seconds"])
            for r in self.records:
                w.writerow([r.epoch, f"{r.mean_contrastive:.6g}", f"{r.mean_classification:.6g}",
                            f"{r.val_top1:.6g}", f"{r.wall_seconds:.6g}"])

    def deterministic_rows(self) -> list[tuple]:
        """Every logged value except wall-clock time."""
        return [(r.epoch, r.mean_contrastive, r.mean_classification, r.val_top1) for r in self.records]


# -- pair sampling ------------------------------------------------------------


class PairPool:
    """Training sequences with their speed variants and cached trajectory scores."""

    def __init__(self, sequences: Sequence[SkeletonSequence], regime: Regime,
                 thresholds: Optional[tuple[float, float]] = None, alpha: float = 1.0, beta: float = 1.0):
        self.sequences = list(sequences)
        self.regime = Regime(regime)
        self.ids = [s.id for s in self.sequences]
        if len(set(self.ids)) != len(self.ids):
            raise DatasetError("duplicate sequence ids in training set")
        if self.regime == Regime.SUPERVISED and any(s.class_label is None for s in self.sequences):
            raise ConfigError("supervised regime needs a class label on every training sequence")
        if self.regime == Regime.SELF_SUPERVISED and len(self.sequences) < 2:
            raise DatasetError("self-supervised pairing needs at least 2 sequences")
        self.variants: dict[str, list[SkeletonSequence]] = {}
        for s in self.sequences:
            v = [speed_half(s)]
            if s.n_frames >= 3:
                v.append(speed_double(s))
            self.variants[s.id] = v
        self.thresholds = thresholds
        self.scores = None
        if self.regime == Regime.SELF_SUPERVISED:
            if thresholds is None:
                raise ConfigError("self-supervised pairing needs similarity thresholds")
            summaries = [trajectory_summary(s) for s in self.sequences]
            self.scores = similarity_matrix(summaries, alpha, beta)
        n = len(self.sequences)
        self.labels = np.full((n, n), -1, dtype=np.int8)
        for i in range(n):
            for j in range(n):
                if i != j:
                    lab = self.label(i, j)
                    self.labels[i, j] = -1 if lab is None else int(lab)

    def label(self, i: int, j: int) -> Optional[PairLabel]:
        if self.regime == Regime.SUPERVISED:
            same = self.sequences[i].class_label == self.sequences[j].class_label
            return PairLabel.SIMILAR if same else PairLabel.DISSIMILAR
        return label_from_score(self.scores[i, j], *self.thresholds)

    def all_sequences(self) -> dict[str, SkeletonSequence]:
        out = {s.id: s for s in self.sequences}
        for vs in self.variants.values():
            out.update({v.id: v for v in vs})
        return out


def sample_pairs(pool: PairPool, seed: int) -> list[PairSample]:
    """One epoch of pairs, SIMILAR and DISSIMILAR alternating.

    Per sequence: a positive with each of its speed variants, one positive
    from the regime's rule (same class, or trajectory score under the lower
    threshold), and then as many negatives as positives overall. Pairs in
    the abstain band never appear.
    """
    rng = np.random.default_rng(seed)
    n = len(pool.sequences)
    source = PairSource.CLASS_LABELS if pool.regime == Regime.SUPERVISED else PairSource.TRAJECTORY
    labels = pool.labels

    positives, negatives = [], []
    for i, s in enumerate(pool.sequences):
        for v in pool.variants[s.id]:
            positives.append(PairSample(s.id, v.id, PairLabel.SIMILAR, PairSource.AUGMENTATION))
        partners = np.flatnonzero(labels[i] == PairLabel.SIMILAR)
        if partners.size:
            j = int(rng.choice(partners))
            positives.append(PairSample(s.id, pool.ids[j], PairLabel.SIMILAR, source))
    anchors = rng.permutation(n)
    k = 0
    attempts = 0
    while len(negatives) < len(positives) and attempts < 4 * len(positives) + n:
        i = int(anchors[k % n])
        k += 1
        attempts += 1
        partners = np.flatnonzero(labels[i] == PairLabel.DISSIMILAR)
        if partners.size:
            j = int(rng.choice(partners))
            negatives.append(PairSample(pool.ids[i], pool.ids[j], PairLabel.DISSIMILAR, source))
    if not negatives:
        raise DatasetError("no dissimilar pair available; the training set is degenerate")
    # keep the epoch balanced: trim the longer list to at most one extra,
    # dropping rule-based positives before augmentation ones
    m = min(len(positives), len(negatives))
    aug = [p for p in positives if p.source == PairSource.AUGMENTATION]
    rule = [p for p in positives if p.source != PairSource.AUGMENTATION]
    keep = aug + [rule[i] for i in rng.permutation(len(rule))]
    pos = [keep[: m + 1][i] for i in rng.permutation(min(len(keep), m + 1))]
    neg = [negatives[i] for i in rng.permutation(len(negatives))][:m]
    out = []
    for a, b in zip(pos, neg):
        out += [a, b]
    out += pos[m:]
    return out


# -- validation -----------------------------------------------------------------


def validation_slice(sequences: Sequence[SkeletonSequence], fraction: float, seed: int):
    """Hold out about ``fraction`` of the sequences, whole performers at a time when ids exist."""
    n = len(sequences)
    target = int(round(fraction * n))
    if target < 2 or n - target < 2:
        return list(sequences), []
    rng = np.random.default_rng(seed)
    performers = sorted({s.performer_id for s in sequences if s.performer_id is not None})
    if performers and all(s.performer_id is not None for s in sequences) and len(performers) > 1:
        held, count = set(), 0
        for p in [performers[i] for i in rng.permutation(len(performers))]:
            if count >= target:
                break
            size = sum(s.performer_id == p for s in sequences)
            if held and abs(count + size - target) > abs(count - target):
                continue
            held.add(p)
            count += size
        val_ids = {s.id for s in sequences if s.performer_id in held}
    else:
        val_ids = {sequences[i].id for i in rng.permutation(n)[:target]}
    train = [s for s in sequences if s.id not in val_ids]
    val = [s for s in sequences if s.id in val_ids]
    return train, val


def evaluate_validation(model, sequences: Sequence[SkeletonSequence],
                        thresholds: Optional[tuple[float, float]] = None, alpha: float = 1.0, beta: float = 1.0) -> float:
    """Leave-one-out top-1 accuracy over ``sequences``.

    With ``thresholds`` set, a hit counts when the retrieved item's
    trajectory score to the query is at most the lower threshold
    (pseudo-labels); otherwise class labels must match.
    """
    if len(sequences) < 2:
        raise DatasetError("validation needs at least 2 sequences")
    with_mask = model.config.input_width == 7 * sequences[0].joint_count
    sigs = encode_many(model, [build_encoder_input(s, with_mask) for s in sequences])
    index = EmbeddingIndex(model.config.embedding_dim, [s.id for s in sequences], sigs,
                           [s.class_label for s in sequences])
    pos = {s.id: i for i, s in enumerate(sequences)}
    scores = None
    if thresholds is not None:
        scores = similarity_matrix([trajectory_summary(s) for s in sequences], alpha, beta)
    elif any(s.class_label is None for s in sequences):
        raise DatasetError("validation without thresholds needs class labels")
    hits = 0
    for i, s in enumerate(sequences):
        (top,) = index.query(sigs[i], 1, exclude=s.id)
        if scores is not None:
            hits += scores[i, pos[top.id]] <= thresholds[0]
        else:
            hits += top.class_label == s.class_label
    return float(hits / len(sequences))


# -- training loop ------------------------------------------------------------


def _make_batch(pairs: Sequence[PairSample], cache: dict, classes: dict) -> PairBatch:
    order: dict[str, int] = {}
    for p in pairs:
        order.setdefault(p.seq_a_id, len(order))
        order.setdefault(p.seq_b_id, len(order))
    ids = list(order)
    return PairBatch(
        inputs=[cache[i] for i in ids],
        pairs=np.array([[order[p.seq_a_id], order[p.seq_b_id]] for p in pairs]),
        similar=np.array([p.label == PairLabel.SIMILAR for p in pairs]),
        classes=np.array([classes.get(i, -1) for i in ids]),
    )


def train(sequences: Sequence[SkeletonSequence], encoder_config: EncoderConfig, config: TrainConfig,
          validation: Optional[Sequence[SkeletonSequence]] = None, progress=None):
    """Train a signature encoder on pre-normalized sequences.

    Returns ``(model, TrainingLog)``; the model carries the parameters of the
    best validation epoch. Without an explicit ``validation`` set, a slice of
    ``sequences`` is held out. Deterministic for a fixed seed when torch runs
    single-threaded.
    """
    torch.manual_seed(config.seed)
    model = build_encoder(encoder_config, config.seed)
    log_ = TrainingLog()
    if config.max_epochs == 0:
        return model, log_

    sequences = list(sequences)
    if validation is None:
        train_set, val_set = validation_slice(sequences, config.val_fraction, config.seed)
    else:
        train_set, val_set = sequences, list(validation)
    if not train_set:
        raise DatasetError("training split is empty")
    supervised = config.regime == Regime.SUPERVISED
    loss_cfg = config.loss
    if supervised and loss_cfg.classification_weight > 0 and not encoder_config.class_count:
        raise ConfigError("classification loss needs EncoderConfig.class_count")

    thresholds = None
    if config.regime == Regime.SELF_SUPERVISED:
        thresholds = calibrate_thresholds(
            [trajectory_summary(s) for s in train_set], config.calibration_pairs, config.seed,
            config.sim_percentiles, config.alpha, config.beta,
        )
        log_.thresholds = thresholds
    pool = PairPool(train_set, config.regime, thresholds, config.alpha, config.beta)
    with_mask = encoder_config.input_width == 7 * train_set[0].joint_count
    everything = pool.all_sequences()
    cache = {i: build_encoder_input(s, with_mask) for i, s in everything.items()}
    classes = {}
    if supervised:
        for s in train_set:
            classes[s.id] = s.class_label
            for v in pool.variants[s.id]:
                classes[v.id] = s.class_label

    opt = torch.optim.Adam(model.parameters(), lr=config.learning_rate, betas=config.betas)
    best_acc, best_state, stale = -math.inf, None, 0
    for epoch in range(config.max_epochs):
        t0 = time.perf_counter()
        model.train()
        pairs = sample_pairs(pool, seed=int(np.random.SeedSequence([config.seed, epoch]).generate_state(1)[0]))
        con_sum, cls_sum, count = 0.0, 0.0, 0
        for b in range(0, len(pairs), config.batch_size):
            chunk = pairs[b : b + config.batch_size]
            batch = _make_batch(chunk, cache, classes)
            opt.zero_grad()
            total, con, cls = batch_loss(model, batch, loss_cfg)
            if not torch.isfinite(total):
                raise NumericalError(
                    f"non-finite loss at epoch {epoch} batch {b // config.batch_size} "
                    f"(first pair {chunk[0].seq_a_id} / {chunk[0].seq_b_id})"
                )
            total.backward()
            opt.step()
            con_sum += float(con.detach()) * len(chunk)
            cls_sum += float(cls.detach()) * len(chunk)
            count += len(chunk)
        model.trained = True
        if len(val_set) >= 2:
            acc = evaluate_validation(model, val_set, thresholds, config.alpha, config.beta)
        else:
            acc = float("nan")
        rec = EpochRecord(epoch, con_sum / count, cls_sum / count, acc, time.perf_counter() - t0)
        log_.records.append(rec)
        if progress:
            progress(rec)
        log.info("epoch %d contrastive %.4f classification %.4f val_top1 %.3f", epoch,
                 rec.mean_contrastive, rec.mean_classification, acc)
        score = acc if not math.isnan(acc) else 0.0
        if score >= best_acc:
            improved = score > best_acc
            best_acc, best_state, log_.best_epoch = score, copy.deepcopy(model.state_dict()), epoch
            stale = 0 if improved else stale + 1
        else:
            stale += 1
        if stale >= config.patience:
            break
    if best_state is not None:
        model.load_state_dict(best_state)
    model.eval()
    return model, log_
