"""Second encoder that maps sub-sequences onto their parent's signature."""

from __future__ import annotations

import copy
import math
import time
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import torch

from .errors import ConfigError, NumericalError, ValidationError
from .features import build_encoder_input
from .index import EmbeddingIndex, Hit
from .model import SignatureEncoder, build_encoder, encode, encode_many, to_tensors
from .motion_data import SkeletonSequence
from .training import EpochRecord, TrainConfig, TrainingLog

MIN_WINDOW = 15
DEFAULT_FRACTIONS = (0.25, 0.5, 0.75)


@dataclass(frozen=True)
class SubsequenceSample:
    parent_id: str
    start_frame: int
    end_frame: int
    sequence: SkeletonSequence


def window_bounds(n: int, fraction: float, stride_fraction: float, offset: int = 0) -> list[tuple[int, int]]:
    w = int(math.floor(fraction * n + 0.5))
    if w < MIN_WINDOW or w > n:
        return []
    step = max(1, int(math.floor(stride_fraction * w + 0.5)))
    return [(s, s + w) for s in range(offset, n - w + 1, step)]


def sample_subsequences(seq: SkeletonSequence, window_fractions: Sequence[float] = DEFAULT_FRACTIONS,
                        stride_fraction: float = 0.5, seed: Optional[int] = None) -> list[SubsequenceSample]:
    """Sliding windows of each fraction of the parent length.

    Windows start at 0 and advance by ``stride_fraction * window``; with a
    ``seed`` the first start is drawn uniformly from [0, stride). Windows
    shorter than 15 frames are skipped.
    """
    for f in window_fractions:
        if not 0.0 < f < 1.0:
            raise ValidationError(f"window fraction must lie in (0, 1), got {f}")
    if not 0.0 < stride_fraction <= 1.0:
        raise ValidationError(f"stride fraction must lie in (0, 1], got {stride_fraction}")
    rng = np.random.default_rng(seed) if seed is not None else None
    out = []
    for f in window_fractions:
        w = int(math.floor(f * seq.n_frames + 0.5))
        step = max(1, int(math.floor(stride_fraction * w + 0.5)))
        offset = int(rng.integers(0, step)) if rng is not None else 0
        for a, b in window_bounds(seq.n_frames, f, stride_fraction, offset):
            mask = None if seq.missing_mask is None else seq.missing_mask[a:b].copy()
            window = seq.replace(id=f"{seq.id}@{a}:{b}", frames=seq.frames[a:b].copy(), missing_mask=mask)
            out.append(SubsequenceSample(seq.id, a, b, window))
    return out


def _uses_mask(model: SignatureEncoder, seq: SkeletonSequence) -> bool:
    return model.config.input_width == 7 * seq.joint_count


def train_submotion(full_model: SignatureEncoder, sequences: Sequence[SkeletonSequence], config: TrainConfig,
                    window_fractions: Sequence[float] = DEFAULT_FRACTIONS, stride_fraction: float = 0.5,
                    init: str = "copy", progress=None):
    """Regress windows onto the frozen full encoder's parent signatures.

    The loss is the squared Euclidean distance, averaged over a batch.
    ``init="copy"`` starts from the full encoder's weights, ``"random"``
    from a fresh initialization; either way the parameters are separate.
    Returns ``(submotion model, TrainingLog)``.
    """
    if not getattr(full_model, "trained", False):
        raise ConfigError("the full-sequence encoder must be trained before submotion training")
    if init not in ("copy", "random"):
        raise ConfigError(f"unknown init {init!r}")
    sequences = list(sequences)
    with_mask = bool(sequences) and _uses_mask(full_model, sequences[0])
    targets = encode_many(full_model, [build_encoder_input(s, with_mask) for s in sequences])
    target_of = {s.id: t for s, t in zip(sequences, targets)}

    windows = []
    for s in sequences:
        windows += sample_subsequences(s, window_fractions, stride_fraction)
    if init == "copy":
        model = copy.deepcopy(full_model)
    else:
        model = build_encoder(full_model.config, config.seed)
    model.submotion = True
    model.trained = True
    log = TrainingLog()
    if config.max_epochs == 0 or not windows:
        return model, log

    inputs = [build_encoder_input(w.sequence, with_mask) for w in windows]
    tensors = to_tensors(model, inputs)
    tgt = torch.as_tensor(np.stack([target_of[w.parent_id] for w in windows]), dtype=model.dtype)
    torch.manual_seed(config.seed)
    opt = torch.optim.Adam(model.parameters(), lr=config.learning_rate, betas=config.betas)
    rng = np.random.default_rng(config.seed)
    for epoch in range(config.max_epochs):
        t0 = time.perf_counter()
        model.train()
        order = rng.permutation(len(windows))
        total, count = 0.0, 0
        for b in range(0, len(order), config.batch_size):
            idx = order[b : b + config.batch_size]
            emb = model([tensors[i] for i in idx])
            loss = ((emb - tgt[idx]) ** 2).sum(dim=1).mean()
            if not torch.isfinite(loss):
                raise NumericalError(f"non-finite submotion loss at epoch {epoch} batch {b // config.batch_size}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += float(loss.detach()) * len(idx)
            count += len(idx)
        rec = EpochRecord(epoch, total / count, 0.0, float("nan"), time.perf_counter() - t0)
        log.records.append(rec)
        if progress:
            progress(rec)
    model.eval()
    log.best_epoch = config.max_epochs - 1
    return model, log


def submotion_target_loss(model: SignatureEncoder, window: SkeletonSequence, parent_signature) -> float:
    """Squared Euclidean distance between the window's embedding and its parent's signature."""
    sig = encode(model, build_encoder_input(window, _uses_mask(model, window)))
    return float(((sig - np.asarray(parent_signature, dtype=np.float64)) ** 2).sum())


def query_submotion(model: SignatureEncoder, window: SkeletonSequence, index: EmbeddingIndex, k: int = 10) -> list[Hit]:
    sig = encode(model, build_encoder_input(window, _uses_mask(model, window)))
    return index.query(sig, k)
