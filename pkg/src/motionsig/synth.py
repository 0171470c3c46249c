"""Parametric synthetic motion classes for desk-scale experiments.

Each class is a set of sinusoidal joint rotations over normalized time
u in [0, 1], posed through forward kinematics on a 16-joint body. Because
the motion is defined on normalized time, sequence length only changes the
sampling density, never the content.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ValidationError
from .motion_data import SkeletonSequence, SkeletonTopology

JOINT_NAMES = (
    "pelvis", "spine", "neck", "head",
    "l_shoulder", "l_elbow", "l_hand",
    "r_shoulder", "r_elbow", "r_hand",
    "l_hip", "l_knee", "l_foot",
    "r_hip", "r_knee", "r_foot",
)
J = {name: i for i, name in enumerate(JOINT_NAMES)}

BODY_TOPOLOGY = SkeletonTopology(
    joint_count=16,
    bone_edges=(
        (0, 1), (1, 2), (2, 3),
        (2, 4), (4, 5), (5, 6),
        (2, 7), (7, 8), (8, 9),
        (0, 10), (10, 11), (11, 12),
        (0, 13), (13, 14), (14, 15),
    ),
    root_joint=0,
    joint_names=JOINT_NAMES,
)

# offset of each joint from its parent in the rest pose (y up, arms hanging)
REST_OFFSETS = np.array([
    [0.0, 0.0, 0.0],
    [0.0, 0.25, 0.0],
    [0.0, 0.25, 0.0],
    [0.0, 0.15, 0.0],
    [0.18, 0.0, 0.0],
    [0.0, -0.28, 0.0],
    [0.0, -0.25, 0.0],
    [-0.18, 0.0, 0.0],
    [0.0, -0.28, 0.0],
    [0.0, -0.25, 0.0],
    [0.10, 0.0, 0.0],
    [0.0, -0.42, 0.0],
    [0.0, -0.42, 0.0],
    [-0.10, 0.0, 0.0],
    [0.0, -0.42, 0.0],
    [0.0, -0.42, 0.0],
])
PELVIS_HEIGHT = 0.94


@dataclass(frozen=True)
class Oscillation:
    """Local rotation angle(u) = offset + amplitude * sin(2 pi cycles u + phase) about ``axis``."""

    joint: int
    axis: str
    amplitude: float
    cycles: float
    phase: float = 0.0
    offset: float = 0.0


@dataclass(frozen=True)
class ClassMotion:
    name: str
    oscillations: tuple[Oscillation, ...]
    root_travel: tuple[float, float, float] = (0.0, 0.0, 0.0)
    root_bob: float = 0.0
    root_bob_cycles: float = 0.0


@dataclass(frozen=True)
class Jitter:
    amplitude: float = 0.2
    frequency: float = 0.1
    phase: float = 0.3
    performer_scale: float = 0.15
    root_offset: float = 0.2
    noise_std: float = 0.003


@dataclass(frozen=True)
class SynthSpec:
    classes: tuple[ClassMotion, ...]
    jitter: Jitter = field(default_factory=Jitter)
    length_range: tuple[int, int] = (15, 600)
    performers: int = 10
    fps: float = 30.0


def _raised(joint, axis, amp, cycles, phase=0.0):
    # 0 at u=0, swings to amp and back each cycle
    return Oscillation(joint, axis, amp / 2, cycles, phase - np.pi / 2, amp / 2)


def default_classes() -> tuple[ClassMotion, ...]:
    return (
        ClassMotion("wave_right", (
            Oscillation(J["r_shoulder"], "z", 0.15, 3.0, 0.0, -2.4),
            Oscillation(J["r_elbow"], "z", 0.6, 3.0),
        )),
        ClassMotion("wave_left", (
            Oscillation(J["l_shoulder"], "z", 0.15, 3.0, 0.0, 2.4),
            Oscillation(J["l_elbow"], "z", 0.6, 3.0),
        )),
        ClassMotion("walk", (
            Oscillation(J["l_hip"], "x", 0.5, 2.0),
            Oscillation(J["r_hip"], "x", 0.5, 2.0, np.pi),
            _raised(J["l_knee"], "x", 0.7, 2.0),
            _raised(J["r_knee"], "x", 0.7, 2.0, np.pi),
            Oscillation(J["l_shoulder"], "x", 0.3, 2.0, np.pi),
            Oscillation(J["r_shoulder"], "x", 0.3, 2.0),
        ), root_travel=(0.0, 0.0, 1.4)),
        ClassMotion("squat", (
            _raised(J["l_hip"], "x", -1.2, 2.0),
            _raised(J["r_hip"], "x", -1.2, 2.0),
            _raised(J["l_knee"], "x", 2.0, 2.0),
            _raised(J["r_knee"], "x", 2.0, 2.0),
        ), root_bob=-0.35, root_bob_cycles=2.0),
        ClassMotion("raise_arms", (
            _raised(J["l_shoulder"], "x", -2.6, 1.0),
            _raised(J["r_shoulder"], "x", -2.6, 1.0),
        )),
        ClassMotion("kick_right", (
            _raised(J["r_hip"], "x", -1.3, 2.0),
            _raised(J["r_knee"], "x", 0.6, 2.0, np.pi / 2),
        )),
        ClassMotion("punch_right", (
            Oscillation(J["r_shoulder"], "x", 0.0, 1.0, 0.0, -1.4),
            _raised(J["r_elbow"], "x", -1.5, 4.0),
        )),
        ClassMotion("jumping_jacks", (
            _raised(J["l_shoulder"], "z", 2.4, 3.0),
            _raised(J["r_shoulder"], "z", -2.4, 3.0),
            _raised(J["l_hip"], "z", 0.35, 3.0),
            _raised(J["r_hip"], "z", -0.35, 3.0),
        ), root_bob=0.08, root_bob_cycles=3.0),
    )


def default_spec(length_range=(15, 600), **jitter) -> SynthSpec:
    return SynthSpec(default_classes(), Jitter(**jitter), tuple(length_range))


def _axis_rotations(axis: str, angles: np.ndarray) -> np.ndarray:
    c, s = np.cos(angles), np.sin(angles)
    one, zero = np.ones_like(angles), np.zeros_like(angles)
    if axis == "x":
        rows = [[one, zero, zero], [zero, c, -s], [zero, s, c]]
    elif axis == "y":
        rows = [[c, zero, s], [zero, one, zero], [-s, zero, c]]
    elif axis == "z":
        rows = [[c, -s, zero], [s, c, zero], [zero, zero, one]]
    else:
        raise ValidationError(f"unknown rotation axis {axis!r}")
    return np.moveaxis(np.array(rows), (0, 1), (-2, -1))


def pose_sequence(
    oscillations,
    u: np.ndarray,
    root_path: np.ndarray,
    scale: float = 1.0,
    topology: SkeletonTopology = BODY_TOPOLOGY,
    offsets: np.ndarray = REST_OFFSETS,
) -> np.ndarray:
    """Forward kinematics: (N,) normalized times to (N, J, 3) joint positions."""
    n = u.shape[0]
    local = np.broadcast_to(np.eye(3), (topology.joint_count, n, 3, 3)).copy()
    for osc in oscillations:
        angle = osc.offset + osc.amplitude * np.sin(2 * np.pi * osc.cycles * u + osc.phase)
        local[osc.joint] = local[osc.joint] @ _axis_rotations(osc.axis, angle)
    world = np.empty_like(local)
    pos = np.empty((n, topology.joint_count, 3))
    r = topology.root_joint
    world[r] = local[r]
    pos[:, r] = root_path
    for p, c, _ in topology.traversal():
        world[c] = world[p] @ local[c]
        pos[:, c] = pos[:, p] + np.einsum("nij,j->ni", world[p], offsets[c] * scale)
    return pos


def synth_generate(spec: SynthSpec, count: int, seed: int, topology: SkeletonTopology = BODY_TOPOLOGY) -> list[SkeletonSequence]:
    """``count`` sequences per class, deterministic given ``seed``.

    Performers are assigned round-robin within each class; each performer
    has a fixed body scale.
    """
    if not spec.classes:
        raise ValidationError("synthetic spec defines no classes")
    if count < 1:
        raise ValidationError("count must be positive")
    lo, hi = spec.length_range
    if not 2 <= lo <= hi:
        raise ValidationError(f"bad length range {spec.length_range}")
    jit = spec.jitter
    rng = np.random.default_rng(seed)
    perf_scale = 1.0 + jit.performer_scale * np.linspace(-1.0, 1.0, spec.performers)
    perf_scale = perf_scale[rng.permutation(spec.performers)]

    def vary(width):
        return rng.uniform(-width, width) if width > 0 else 0.0

    out = []
    for label, motion in enumerate(spec.classes):
        for k in range(count):
            n = int(rng.integers(lo, hi + 1))
            u = np.linspace(0.0, 1.0, n)
            oscs = tuple(
                Oscillation(
                    o.joint, o.axis,
                    o.amplitude * (1 + vary(jit.amplitude)),
                    o.cycles * (1 + vary(jit.frequency)),
                    o.phase + vary(jit.phase),
                    o.offset * (1 + vary(jit.amplitude)),
                )
                for o in motion.oscillations
            )
            performer = k % spec.performers
            scale = perf_scale[performer]
            start = np.array([vary(jit.root_offset), PELVIS_HEIGHT * scale, vary(jit.root_offset)])
            travel = np.asarray(motion.root_travel) * (1 + vary(jit.amplitude))
            bob = motion.root_bob * (1 + vary(jit.amplitude)) * scale
            root = start + u[:, None] * travel
            if motion.root_bob:
                root[:, 1] += bob * 0.5 * (1 - np.cos(2 * np.pi * motion.root_bob_cycles * u))
            frames = pose_sequence(oscs, u, root, scale, topology)
            if jit.noise_std > 0:
                frames = frames + rng.normal(0.0, jit.noise_std, frames.shape)
            out.append(SkeletonSequence(
                id=f"c{label}_s{k:03d}",
                frames=frames,
                topology=topology,
                fps=spec.fps,
                class_label=label,
                performer_id=f"p{performer}",
            ))
    return out
