"""Motion field / motion distance features and trajectory-based pair labels."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ValidationError
from .motion_data import SkeletonSequence


class PairLabel(enum.IntEnum):
    DISSIMILAR = 0
    SIMILAR = 1


# pair_label returns None when the score falls between the two thresholds
ABSTAIN = None


@dataclass(frozen=True)
class TrajectorySummary:
    whole_video_mf: np.ndarray  # (J, 3), last frame minus first
    md_profile: np.ndarray  # (J,)

    @property
    def joint_count(self) -> int:
        return self.md_profile.shape[0]


def frame_motion_field(seq: SkeletonSequence, i: int, j: int) -> np.ndarray:
    """Joint-wise displacement ``F[i] - F[j]``, shape (J, 3)."""
    n = seq.n_frames
    if not (0 <= i < n and 0 <= j < n):
        raise ValidationError(f"frame indices ({i}, {j}) out of range for {n} frames")
    return seq.frames[i] - seq.frames[j]


def motion_distance_profile(seq: SkeletonSequence) -> np.ndarray:
    """Per-joint path length: sum over consecutive frames of the displacement norm.

    Summation uses ``math.fsum`` so that splitting a segment into two exact
    halves leaves the total bit-identical.
    """
    steps = np.linalg.norm(np.diff(seq.frames, axis=0), axis=2)
    return np.array([math.fsum(steps[:, j]) for j in range(steps.shape[1])])


def build_encoder_input(seq: SkeletonSequence, with_mask: Optional[bool] = None) -> np.ndarray:
    """Per-frame rows ``[joints (3J) | F[t+1] - F[t] (3J) | mask bits (J)]``.

    The last row's motion-field block is zero. Mask bits are appended when
    the sequence carries a mask, or when ``with_mask`` forces them (zeros if
    no mask exists).
    """
    f = seq.frames
    n, J, _ = f.shape
    mf = np.zeros_like(f)
    mf[:-1] = f[1:] - f[:-1]
    blocks = [f.reshape(n, 3 * J), mf.reshape(n, 3 * J)]
    if with_mask is None:
        with_mask = seq.missing_mask is not None
    if with_mask:
        mask = seq.missing_mask if seq.missing_mask is not None else np.zeros((n, J), dtype=bool)
        blocks.append(mask.astype(np.float64))
    return np.concatenate(blocks, axis=1)


def encoder_input_width(joint_count: int, with_mask: bool = False) -> int:
    return (7 if with_mask else 6) * joint_count


def trajectory_summary(seq: SkeletonSequence) -> TrajectorySummary:
    return TrajectorySummary(
        whole_video_mf=frame_motion_field(seq, seq.n_frames - 1, 0),
        md_profile=motion_distance_profile(seq),
    )


def trajectory_similarity(a: TrajectorySummary, b: TrajectorySummary, alpha: float = 1.0, beta: float = 1.0) -> float:
    """Dissimilarity score: alpha * ||mf_a - mf_b||_F / J + beta * ||md_a - md_b||_1 / J.

    Zero for identical summaries; lower means more alike.
    """
    if a.joint_count != b.joint_count:
        raise ValidationError(f"joint count mismatch: {a.joint_count} vs {b.joint_count}")
    J = a.joint_count
    mf = np.linalg.norm(a.whole_video_mf - b.whole_video_mf)
    md = np.abs(a.md_profile - b.md_profile).sum()
    return float(alpha * mf / J + beta * md / J)


def similarity_matrix(summaries, alpha: float = 1.0, beta: float = 1.0) -> np.ndarray:
    """All pairwise :func:`trajectory_similarity` scores, vectorized."""
    mf = np.stack([s.whole_video_mf.reshape(-1) for s in summaries])
    md = np.stack([s.md_profile for s in summaries])
    J = md.shape[1]
    d_mf = np.linalg.norm(mf[:, None, :] - mf[None, :, :], axis=2)
    d_md = np.abs(md[:, None, :] - md[None, :, :]).sum(axis=2)
    return alpha * d_mf / J + beta * d_md / J


def label_from_score(score: float, tau_sim: float, tau_dis: float) -> Optional[PairLabel]:
    if tau_sim >= tau_dis:
        raise ValidationError(f"tau_sim ({tau_sim}) must be below tau_dis ({tau_dis})")
    if score <= tau_sim:
        return PairLabel.SIMILAR
    if score >= tau_dis:
        return PairLabel.DISSIMILAR
    return ABSTAIN


def pair_label(a: SkeletonSequence, b: SkeletonSequence, tau_sim: float, tau_dis: float,
               alpha: float = 1.0, beta: float = 1.0) -> Optional[PairLabel]:
    if tau_sim >= tau_dis:
        raise ValidationError(f"tau_sim ({tau_sim}) must be below tau_dis ({tau_dis})")
    score = trajectory_similarity(trajectory_summary(a), trajectory_summary(b), alpha, beta)
    return label_from_score(score, tau_sim, tau_dis)


def calibrate_thresholds(summaries, n_pairs: int = 1000, seed: int = 0,
                         percentiles=(10.0, 50.0), alpha: float = 1.0, beta: float = 1.0) -> tuple[float, float]:
    """Thresholds at the given percentiles of scores over random distinct pairs."""
    m = len(summaries)
    if m < 2:
        raise ValidationError("need at least two sequences to calibrate thresholds")
    rng = np.random.default_rng(seed)
    i = rng.integers(0, m, n_pairs)
    j = (i + rng.integers(1, m, n_pairs)) % m
    scores = np.array([trajectory_similarity(summaries[a], summaries[b], alpha, beta) for a, b in zip(i, j)])
    lo, hi = np.percentile(scores, percentiles)
    if not lo < hi:
        hi = np.nextafter(lo, np.inf)
    return float(lo), float(hi)


def dump_features(seq: SkeletonSequence, path) -> None:
    x = build_encoder_input(seq)
    J = seq.joint_count
    cols = [f"{a}{j}" for j in range(J) for a in "xyz"]
    cols += [f"mf{a}{j}" for j in range(J) for a in "xyz"]
    if x.shape[1] > 6 * J:
        cols += [f"m{j}" for j in range(J)]
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for row in x:
            w.writerow([f"{v:.6g}" for v in row])


def dump_summary(summary: TrajectorySummary, path) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mfx", "mfy", "mfz", "md"])
        for mf, md in zip(summary.whole_video_mf, summary.md_profile):
            w.writerow([f"{v:.6g}" for v in (*mf, md)])
