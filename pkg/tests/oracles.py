"""Independent reference implementations shared by unit and acceptance tests.

Each one is written in the most literal form available (plain loops, path
enumeration, exhaustive scans) and shares no code with the package.
"""

import math

import numpy as np
import torch

from motionsig.model import PairBatch, batch_loss


def mf_oracle(frames, i, j):
    n, J, _ = frames.shape
    return np.array([[frames[i, k, c] - frames[j, k, c] for c in range(3)] for k in range(J)])


def md_oracle(frames):
    n, J, _ = frames.shape
    out = []
    for j in range(J):
        total = 0.0
        for i in range(n - 1):
            total += math.sqrt(sum((frames[i + 1, j, k] - frames[i, j, k]) ** 2 for k in range(3)))
        out.append(total)
    return np.array(out)


def enumerate_dtw(cost):
    """Brute force over every monotone path; minimize (cost, length) lexicographically."""
    n, m = cost.shape
    best = (math.inf, 0)

    def walk(i, j, c, length):
        nonlocal best
        c += cost[i, j]
        length += 1
        if (i, j) == (n - 1, m - 1):
            best = min(best, (c, length))
            return
        if i + 1 < n and j + 1 < m:
            walk(i + 1, j + 1, c, length)
        if i + 1 < n:
            walk(i + 1, j, c, length)
        if j + 1 < m:
            walk(i, j + 1, c, length)

    walk(0, 0, 0.0, 0)
    return best[0] / best[1] * 1000.0


def scan_oracle(ids, vectors, q, k):
    """Plain-Python exhaustive scan over float32 entries; ties by ascending id."""
    q32 = [float(v) for v in np.asarray(q, dtype=np.float32)]
    scored = []
    for i, vec in zip(ids, np.asarray(vectors, dtype=np.float32)):
        d = math.sqrt(math.fsum((float(a) - b) ** 2 for a, b in zip(vec, q32)))
        scored.append((d, i))
    scored.sort()
    return [i for _, i in scored[:k]]


def finite_difference(model, batch, cfg, step=1e-5):
    tensors = [torch.as_tensor(x, dtype=model.dtype) for x in batch.inputs]
    out = {}
    with torch.no_grad():
        for name, p in model.named_parameters():
            flat = p.view(-1)
            g = np.empty(flat.numel())
            for k in range(flat.numel()):
                orig = flat[k].item()
                flat[k] = orig + step
                up = batch_loss(model, batch, cfg, tensors)[0].item()
                flat[k] = orig - step
                down = batch_loss(model, batch, cfg, tensors)[0].item()
                flat[k] = orig
                g[k] = (up - down) / (2 * step)
            out[name] = g.reshape(p.shape)
    return out


def max_relative_error(a, b, floor=1e-6):
    worst = 0.0
    for name in a:
        x, y = a[name].ravel(), b[name].ravel()
        worst = max(worst, float(np.max(np.abs(x - y) / np.maximum(np.maximum(np.abs(x), np.abs(y)), floor))))
    return worst


def random_batch(rng, width=12, n_seq=4, classes=3):
    xs = [rng.normal(size=(int(rng.integers(2, 7)), width)) for _ in range(n_seq)]
    return PairBatch(
        xs,
        np.array([[0, 1], [2, 3], [1, 2]]),
        np.array([True, False, False]),
        rng.integers(0, classes, size=n_seq),
    )
