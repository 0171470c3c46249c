import numpy as np
import pytest
import torch

from motionsig.motion_data import SkeletonSequence, SkeletonTopology
from motionsig.synth import BODY_TOPOLOGY

torch.set_num_threads(1)


def chain_topology(J):
    return SkeletonTopology(J, tuple((j - 1, j) for j in range(1, J)), 0)


def random_tree(J, rng):
    return SkeletonTopology(J, tuple((int(rng.integers(0, j)), j) for j in range(1, J)), 0)


def random_sequence(rng, J=5, N=10, topology=None, id="s", scale=1.0, label=None):
    topology = topology or random_tree(J, rng)
    J = topology.joint_count
    frames = np.cumsum(rng.normal(0.0, 0.05 * scale, size=(N, J, 3)), axis=0) + rng.normal(0, scale, size=(1, J, 3))
    return SkeletonSequence(id, frames, topology, class_label=label)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def body():
    return BODY_TOPOLOGY


@pytest.fixture
def topo25():
    return chain_topology(25)


def dyadic_sequence(rng, J=5, N=10, topology=None, id="s", bits=10):
    """Random walk on the 2**-bits grid: midpoints, differences and halvings stay exact."""
    topology = topology or random_tree(J, rng)
    J = topology.joint_count
    steps = rng.integers(-64, 65, size=(N, J, 3))
    start = rng.integers(-2048, 2049, size=(1, J, 3))
    frames = np.ldexp((np.cumsum(steps, axis=0) + start).astype(np.float64), -bits)
    return SkeletonSequence(id, frames, topology)


# steps whose Euclidean norms are integers (1, 3, 7, 9, 11)
_INTEGER_NORM_STEPS = np.array([[0, 0, 1], [1, 2, 2], [2, 3, 6], [1, 4, 8], [2, 6, 9], [0, 0, 0]])


def lattice_sequence(rng, J=5, N=10, topology=None, id="s", bits=8):
    """Random walk whose per-step norms are exact multiples of 2**-bits.

    Every motion-distance partial sum is then exactly representable, so
    path-length identities can be checked bit for bit.
    """
    topology = topology or random_tree(J, rng)
    J = topology.joint_count
    pick = _INTEGER_NORM_STEPS[rng.integers(0, len(_INTEGER_NORM_STEPS), size=(N - 1, J))]
    perm = np.argsort(rng.random((N - 1, J, 3)), axis=2)
    steps = np.take_along_axis(pick, perm, axis=2) * rng.choice([-1, 1], size=(N - 1, J, 3))
    start = rng.integers(-512, 513, size=(1, J, 3))
    walk = np.concatenate([start, start + np.cumsum(steps, axis=0)], axis=0)
    return SkeletonSequence(id, np.ldexp(walk.astype(np.float64), -bits), topology)


_VERDICTS: dict[int, str] = {}


@pytest.fixture
def verdict():
    """Record one pass/fail line per acceptance criterion."""

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"CRITERION {number:>2} {'PASS' if ok else 'FAIL'}: {detail}"
        _VERDICTS[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_VERDICTS):
            terminalreporter.write_line(_VERDICTS[n])
