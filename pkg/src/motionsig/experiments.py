"""Desk-scale retrieval experiments on the synthetic motion classes.

Shared by ``scripts/toy_experiment.py`` and the acceptance tests.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import torch

from .evaluation import make_queries, topn_accuracy
from .features import build_encoder_input, encoder_input_width
from .index import EmbeddingIndex, build_index
from .model import EncoderConfig, LossConfig, encode, encode_many
from .motion_data import drop_joints, mean_bone_lengths, normalize_bone_lengths, speed_half
from .submotion import query_submotion, sample_subsequences, train_submotion
from .synth import default_spec, synth_generate
from .training import Regime, TrainConfig, train


@dataclass(frozen=True)
class ToySetup:
    per_class: int = 40
    length_range: tuple[int, int] = (15, 120)
    data_seed: int = 7
    test_performers: tuple[str, ...] = ("p8", "p9")
    embedding_dim: int = 64
    hidden_size: int = 64
    num_layers: int = 1
    batch_size: int = 32
    max_epochs: int = 50
    patience: int = 10
    seed: int = 0
    dropout: Optional[float] = None


@dataclass
class ToyData:
    everything: list
    train: list
    test: list
    class_count: int


def prepare_toy_data(setup: ToySetup) -> ToyData:
    """Generate, normalize to train-split mean bone lengths, optionally mask joints."""
    spec = default_spec(setup.length_range)
    raw = synth_generate(spec, setup.per_class, setup.data_seed)
    train_raw = [s for s in raw if s.performer_id not in setup.test_performers]
    canon = mean_bone_lengths(train_raw)
    seqs = [normalize_bone_lengths(s, canon) for s in raw]
    if setup.dropout:
        seqs = [drop_joints(s, setup.dropout, setup.data_seed * 100003 + i) for i, s in enumerate(seqs)]
    train_ = [s for s in seqs if s.performer_id not in setup.test_performers]
    test = [s for s in seqs if s.performer_id in setup.test_performers]
    return ToyData(seqs, train_, test, len(spec.classes))


def encoder_config(setup: ToySetup, data: ToyData, supervised: bool) -> EncoderConfig:
    J = data.everything[0].joint_count
    return EncoderConfig(
        input_width=encoder_input_width(J, with_mask=bool(setup.dropout)),
        hidden_size=setup.hidden_size,
        num_recurrent_layers=setup.num_layers,
        embedding_dim=setup.embedding_dim,
        class_count=data.class_count if supervised else None,
    )


def train_regime(setup: ToySetup, data: ToyData, regime: Regime, progress=None):
    supervised = Regime(regime) == Regime.SUPERVISED
    tc = TrainConfig(
        regime=regime,
        batch_size=setup.batch_size,
        learning_rate=1e-3,
        max_epochs=setup.max_epochs,
        seed=setup.seed,
        patience=setup.patience,
        loss=LossConfig(margin=1.0, contrastive_weight=1.0, classification_weight=1.0 if supervised else 0.0),
    )
    return train(data.train, encoder_config(setup, data, supervised), tc, progress=progress)


@dataclass
class RetrievalScores:
    top1: float
    top10: float


def retrieval_scores(model, data: ToyData) -> tuple[RetrievalScores, EmbeddingIndex]:
    """Test-split queries against an index of every sequence, leaving the query out."""
    index = build_index(model, data.everything)
    queries = make_queries(model, data.test)
    return RetrievalScores(topn_accuracy(index, queries, 1), topn_accuracy(index, queries, 10)), index


@dataclass
class SpeedInvariance:
    median_rank: float
    mean_fraction_beaten: float
    ranks: np.ndarray


def speed_invariance(model, data: ToyData, index: EmbeddingIndex) -> SpeedInvariance:
    """Rank of speed_half(s) among {speed_half(s)} plus all other-class entries, by distance from s."""
    with_mask = model.config.input_width == 7 * data.test[0].joint_count
    ranks, beaten = [], []
    for s in data.test:
        sig = index.vector_of(s.id).astype(np.float64)
        slow = encode(model, build_encoder_input(speed_half(s), with_mask))
        d_slow = np.linalg.norm(slow - sig)
        d = index.distances(sig)
        others = np.array([l != s.class_label for l in index.labels])
        d_other = d[others]
        ranks.append(1 + int(np.sum(d_other < d_slow)))
        beaten.append(float(np.mean(d_other > d_slow)))
    return SpeedInvariance(float(np.median(ranks)), float(np.mean(beaten)), np.array(ranks))


@dataclass
class SubmotionScores:
    hit_rate: float
    windows: int
    initial_loss: float
    final_loss: float


def submotion_experiment(full_model, data: ToyData, setup: ToySetup, epochs: int = 20, k: int = 5,
                         train_on: str = "train", learning_rate: float = 1e-3, progress=None):
    """Train the window encoder, then query with 0.5-fraction windows of test sequences."""
    source = data.train if train_on == "train" else data.everything
    tc = TrainConfig(batch_size=setup.batch_size, max_epochs=epochs, seed=setup.seed, learning_rate=learning_rate)
    sub, log = train_submotion(full_model, source, tc, progress=progress)
    index = build_index(full_model, data.everything)
    hits = total = 0
    for s in data.test:
        for w in sample_subsequences(s, (0.5,), 0.5):
            res = query_submotion(sub, w.sequence, index, k)
            hits += any(h.id == s.id for h in res)
            total += 1
    rate = hits / total if total else float("nan")
    first = log.records[0].mean_contrastive if log.records else float("nan")
    last = log.records[-1].mean_contrastive if log.records else float("nan")
    return SubmotionScores(rate, total, first, last), sub, log
