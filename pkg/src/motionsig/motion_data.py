"""Skeleton sequences: types, text I/O, bone-length normalization, augmentation."""

from __future__ import annotations

import dataclasses
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DatasetError, DegenerateBoneError, ParseError, ValidationError

SPLITS = ("train", "test")


@dataclass(frozen=True)
class SkeletonTopology:
    joint_count: int
    bone_edges: tuple[tuple[int, int], ...]
    root_joint: int = 0
    joint_names: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        J = self.joint_count
        edges = tuple((int(p), int(c)) for p, c in self.bone_edges)
        object.__setattr__(self, "bone_edges", edges)
        if self.joint_names is not None:
            object.__setattr__(self, "joint_names", tuple(self.joint_names))
        if J < 1:
            raise ValidationError("joint_count must be positive")
        if not 0 <= self.root_joint < J:
            raise ValidationError(f"root joint {self.root_joint} out of range [0, {J})")
        if len(edges) != J - 1:
            raise ValidationError(f"tree over {J} joints needs {J - 1} bones, got {len(edges)}")
        parents = {}
        for p, c in edges:
            if not (0 <= p < J and 0 <= c < J):
                raise ValidationError(f"bone ({p}, {c}) has an index outside [0, {J})")
            if c == self.root_joint:
                raise ValidationError(f"bone ({p}, {c}) points into the root")
            if c in parents:
                raise ValidationError(f"joint {c} has two parents")
            parents[c] = p
        seen = {self.root_joint}
        for p, c, _ in self._bfs(edges):
            seen.add(c)
        if len(seen) != J:
            raise ValidationError("bone edges do not connect every joint to the root")
        if self.joint_names is not None and len(self.joint_names) != J:
            raise ValidationError("joint_names length differs from joint_count")

    def _bfs(self, edges):
        children: dict[int, list[tuple[int, int]]] = {}
        for b, (p, c) in enumerate(edges):
            children.setdefault(p, []).append((c, b))
        queue = deque([self.root_joint])
        visited = {self.root_joint}
        while queue:
            p = queue.popleft()
            for c, b in children.get(p, ()):
                if c in visited:
                    continue
                visited.add(c)
                queue.append(c)
                yield p, c, b

    def traversal(self) -> list[tuple[int, int, int]]:
        """(parent, child, bone index) triples in breadth-first order from the root."""
        return list(self._bfs(self.bone_edges))

    @property
    def bone_count(self) -> int:
        return len(self.bone_edges)


@dataclass
class SkeletonSequence:
    """N frames of J joints in meters; ``frames`` has shape (N, J, 3)."""

    id: str
    frames: np.ndarray
    topology: SkeletonTopology
    fps: float = 30.0
    class_label: Optional[int] = None
    performer_id: Optional[str] = None
    missing_mask: Optional[np.ndarray] = None

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 3 or self.frames.shape[2] != 3:
            raise ValidationError(f"{self.id}: frames must have shape (N, J, 3), got {self.frames.shape}")
        n, j, _ = self.frames.shape
        if n < 2:
            raise ValidationError(f"{self.id}: a sequence needs at least 2 frames, got {n}")
        if j != self.topology.joint_count:
            raise ValidationError(
                f"{self.id}: frames carry {j} joints but topology has {self.topology.joint_count}"
            )
        if not (self.fps > 0 and math.isfinite(self.fps)):
            raise ValidationError(f"{self.id}: fps must be positive, got {self.fps}")
        if self.missing_mask is not None:
            self.missing_mask = np.asarray(self.missing_mask, dtype=bool)
            if self.missing_mask.shape != (n, j):
                raise ValidationError(f"{self.id}: missing_mask must have shape {(n, j)}")
        if not np.all(np.isfinite(self.frames)):
            raise ValidationError(f"{self.id}: non-finite coordinate without a missing flag")

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def joint_count(self) -> int:
        return self.frames.shape[1]

    def replace(self, **changes) -> "SkeletonSequence":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    id: str
    class_label: Optional[int]
    performer_id: Optional[str]
    split: str
    provenance: Optional[str] = None


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry] = field(default_factory=list)
    root: Path = Path(".")

    def __post_init__(self):
        ids = [e.id for e in self.entries]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise DatasetError(f"duplicate sequence ids in manifest: {dup[:5]}")
        for e in self.entries:
            if e.split not in SPLITS:
                raise DatasetError(f"{e.id}: split must be one of {SPLITS}, got {e.split!r}")

    def split(self, name: str) -> list[ManifestEntry]:
        return [e for e in self.entries if e.split == name]

    def resolve(self, entry: ManifestEntry) -> Path:
        p = Path(entry.path)
        return p if p.is_absolute() else self.root / p

    def load(self, topology: SkeletonTopology, split: Optional[str] = None) -> list[SkeletonSequence]:
        entries = self.entries if split is None else self.split(split)
        seqs = []
        for e in entries:
            seq = load_sequence(self.resolve(e), topology)
            seqs.append(seq.replace(
                id=e.id,
                class_label=e.class_label if e.class_label is not None else seq.class_label,
                performer_id=e.performer_id if e.performer_id is not None else seq.performer_id,
            ))
        return seqs


# -- text formats -----------------------------------------------------------


def _header_fields(tokens, path, lineno):
    out = {}
    for tok in tokens:
        if "=" not in tok:
            raise ParseError(f"malformed header field {tok!r}", lineno, path)
        k, v = tok.split("=", 1)
        out[k] = v
    return out


def read_topology(path) -> SkeletonTopology:
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or not lines[0].startswith("#topology"):
        raise ParseError("missing '#topology v1' header", 1, path)
    head = lines[0].split()
    if len(head) < 2 or head[1] != "v1":
        raise ParseError("unsupported topology version", 1, path)
    fields = _header_fields(head[2:], path, 1)
    try:
        joints = int(fields["joints"])
        root = int(fields.get("root", 0))
    except (KeyError, ValueError) as exc:
        raise ParseError(f"bad topology header: {exc}", 1, path) from None
    edges, names = [], None
    for lineno, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#names"):
            names = line.split()[1:]
            continue
        if line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError("expected 'parent child'", lineno, path)
        try:
            edges.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise ParseError("bone indices must be integers", lineno, path) from None
    return SkeletonTopology(joints, tuple(edges), root, tuple(names) if names else None)


def write_topology(topology: SkeletonTopology, path) -> None:
    lines = [f"#topology v1 joints={topology.joint_count} root={topology.root_joint}"]
    if topology.joint_names:
        lines.append("#names " + " ".join(topology.joint_names))
    lines += [f"{p} {c}" for p, c in topology.bone_edges]
    Path(path).write_text("\n".join(lines) + "\n")


def load_sequence(path, topology: SkeletonTopology, id: Optional[str] = None) -> SkeletonSequence:
    """Parse a ``#skeleton v1`` text file.

    Joints written as ``nan nan nan`` must be listed on a ``#missing`` line
    (``frame:joint`` pairs); they are filled by :func:`fill_missing` and
    flagged in ``missing_mask``.  Unflagged NaNs are rejected.
    """
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise ParseError(str(exc), None, path) from None
    if not lines or not lines[0].startswith("#skeleton"):
        raise ParseError("missing '#skeleton v1' header", 1, path)
    head = lines[0].split()
    if len(head) < 2 or head[1] != "v1":
        raise ParseError("unsupported sequence format version", 1, path)
    fields = _header_fields(head[2:], path, 1)
    try:
        joints = int(fields["joints"])
        fps = float(fields.get("fps", 30.0))
        label = int(fields["label"]) if "label" in fields else None
    except (KeyError, ValueError) as exc:
        raise ParseError(f"bad header: {exc}", 1, path) from None
    performer = fields.get("performer")
    if joints != topology.joint_count:
        raise ValidationError(f"{path}: header declares {joints} joints, topology has {topology.joint_count}")

    rows, flagged = [], set()
    for lineno, line in enumerate(lines[1:], start=2):
        text = line.strip()
        if not text:
            continue
        if text.startswith("#missing"):
            for tok in text.split()[1:]:
                try:
                    f, j = tok.split(":")
                    flagged.add((int(f), int(j)))
                except ValueError:
                    raise ParseError(f"bad missing entry {tok!r}", lineno, path) from None
            continue
        if text.startswith("#"):
            continue
        parts = text.split()
        if len(parts) != 3 * joints:
            raise ValidationError(
                f"{path}:{lineno}: frame has {len(parts) / 3:g} joints, expected {joints}"
            )
        try:
            rows.append([float(x) for x in parts])
        except ValueError:
            raise ParseError("non-numeric coordinate", lineno, path) from None
    frames = np.array(rows, dtype=np.float64).reshape(len(rows), joints, 3) if rows else np.zeros((0, joints, 3))
    nan_joints = ~np.all(np.isfinite(frames), axis=2)
    mask = None
    if flagged or nan_joints.any():
        mask = np.zeros(nan_joints.shape, dtype=bool)
        for f, j in flagged:
            if not (0 <= f < frames.shape[0] and 0 <= j < joints):
                raise ValidationError(f"{path}: #missing entry {f}:{j} out of range")
            mask[f, j] = True
        stray = nan_joints & ~mask
        if stray.any():
            f, j = np.argwhere(stray)[0]
            raise ValidationError(f"{path}: non-finite coordinate at frame {f} joint {j} without a missing flag")
        frames = fill_missing(frames, mask, topology.root_joint)
    return SkeletonSequence(
        id=id if id is not None else path.stem,
        frames=frames,
        topology=topology,
        fps=fps,
        class_label=label,
        performer_id=performer,
        missing_mask=mask,
    )


def save_sequence(seq: SkeletonSequence, path) -> None:
    head = f"#skeleton v1 joints={seq.joint_count} fps={seq.fps:.17g}"
    if seq.class_label is not None:
        head += f" label={seq.class_label}"
    if seq.performer_id is not None:
        head += f" performer={seq.performer_id}"
    lines = [head]
    mask = seq.missing_mask
    if mask is not None and mask.any():
        lines.append("#missing " + " ".join(f"{f}:{j}" for f, j in np.argwhere(mask)))
    for t, frame in enumerate(seq.frames):
        vals = []
        for j, xyz in enumerate(frame):
            if mask is not None and mask[t, j]:
                vals += ["nan", "nan", "nan"]
            else:
                vals += [repr(float(v)) for v in xyz]
        lines.append(" ".join(vals))
    Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path) -> DatasetManifest:
    """Tab-separated ``path id label performer split [provenance]``; ``-`` marks an absent value."""
    path = Path(path)
    entries = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) not in (5, 6):
            raise ParseError(f"expected 5 or 6 tab-separated fields, got {len(parts)}", lineno, path)
        p, sid, label, performer, split = parts[:5]
        try:
            lab = None if label in ("-", "") else int(label)
        except ValueError:
            raise ParseError(f"bad label {label!r}", lineno, path) from None
        entries.append(ManifestEntry(
            path=p,
            id=sid,
            class_label=lab,
            performer_id=None if performer in ("-", "") else performer,
            split=split.strip(),
            provenance=parts[5].strip() if len(parts) == 6 else None,
        ))
    return DatasetManifest(entries, root=path.parent)


def write_manifest(manifest: DatasetManifest, path) -> None:
    with_prov = any(e.provenance is not None for e in manifest.entries)
    lines = []
    for e in manifest.entries:
        row = [
            e.path,
            e.id,
            "-" if e.class_label is None else str(e.class_label),
            e.performer_id or "-",
            e.split,
        ]
        if with_prov:
            row.append(e.provenance or "-")
        lines.append("\t".join(row))
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


# -- missing data -----------------------------------------------------------


def fill_missing(frames: np.ndarray, mask: np.ndarray, root_joint: int) -> np.ndarray:
    """Replace flagged joints by their last observed value.

    A joint missing from the first frame onward takes the first frame's root
    position (zeros if the root is missing too) and holds it.
    """
    out = np.array(frames, dtype=np.float64, copy=True)
    n, J = mask.shape
    for j in range(J):
        col = mask[:, j]
        if not col.any():
            continue
        last = None
        for t in range(n):
            if not col[t]:
                last = out[t, j]
                continue
            if last is None:
                root = out[0, root_joint]
                last = root.copy() if not mask[0, root_joint] and np.all(np.isfinite(root)) else np.zeros(3)
            out[t, j] = last
    return out


def drop_joints(seq: SkeletonSequence, fraction: float, seed: int) -> SkeletonSequence:
    """Mask the same random ``round(fraction * J)`` joints in every frame.

    The root is never chosen since the fill policy anchors on it.
    """
    if not 0.0 < fraction < 1.0:
        raise ValidationError(f"fraction must lie in (0, 1), got {fraction}")
    J = seq.joint_count
    count = int(math.floor(fraction * J + 0.5))
    if count < 1:
        raise ValidationError(f"fraction {fraction} masks no joint out of {J}")
    candidates = np.array([j for j in range(J) if j != seq.topology.root_joint])
    if count > len(candidates):
        raise ValidationError(f"cannot mask {count} non-root joints out of {J}")
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(candidates, size=count, replace=False))
    mask = np.zeros((seq.n_frames, J), dtype=bool) if seq.missing_mask is None else seq.missing_mask.copy()
    mask[:, chosen] = True
    frames = seq.frames.copy()
    frames[:, chosen] = np.nan
    return seq.replace(frames=fill_missing(frames, mask, seq.topology.root_joint), missing_mask=mask)


# -- bone-length normalization ------------------------------------------------


def bone_lengths(seq: SkeletonSequence) -> np.ndarray:
    """(N, B) bone lengths in ``bone_edges`` order."""
    edges = np.array(seq.topology.bone_edges, dtype=int).reshape(-1, 2)
    vec = seq.frames[:, edges[:, 1]] - seq.frames[:, edges[:, 0]]
    return np.linalg.norm(vec, axis=2)


def mean_bone_lengths(seqs: Iterable[SkeletonSequence]) -> np.ndarray:
    """Per-bone mean length over every frame of every sequence."""
    total, count = None, 0
    for s in seqs:
        lens = bone_lengths(s)
        total = lens.sum(axis=0) if total is None else total + lens.sum(axis=0)
        count += lens.shape[0]
    if total is None:
        raise DatasetError("cannot average bone lengths over an empty set")
    return total / count


def normalize_bone_lengths(seq: SkeletonSequence, canonical_lengths: Sequence[float]) -> SkeletonSequence:
    """Retarget every bone to its canonical length, keeping its direction.

    Bones are rebuilt breadth-first from the root, which stays in place.
    """
    canon = np.asarray(canonical_lengths, dtype=np.float64)
    topo = seq.topology
    if canon.shape != (topo.bone_count,):
        raise ValidationError(f"expected {topo.bone_count} canonical lengths, got shape {canon.shape}")
    if not np.all(canon > 0):
        raise ValidationError("canonical bone lengths must be positive")
    if seq.missing_mask is not None and seq.missing_mask.any():
        raise ValidationError(f"{seq.id}: normalize before masking joints")
    src = seq.frames
    out = np.empty_like(src)
    out[:, topo.root_joint] = src[:, topo.root_joint]
    for p, c, b in topo.traversal():
        vec = src[:, c] - src[:, p]
        norm = np.linalg.norm(vec, axis=1)
        bad = np.flatnonzero(norm <= 1e-12)
        if bad.size:
            raise DegenerateBoneError(p, c, int(bad[0]))
        out[:, c] = out[:, p] + vec * (canon[b] / norm)[:, None]
    return seq.replace(frames=out)


def uniform_scale(seq: SkeletonSequence, s: float) -> SkeletonSequence:
    """Scale the skeleton about its root, frame by frame."""
    root = seq.frames[:, seq.topology.root_joint : seq.topology.root_joint + 1]
    return seq.replace(frames=root + s * (seq.frames - root))


# -- speed augmentation -------------------------------------------------------


def speed_double(seq: SkeletonSequence) -> SkeletonSequence:
    """Keep frames 0, 2, 4, ...; an odd-length sequence keeps its final frame."""
    if seq.n_frames < 3:
        raise ValidationError(f"{seq.id}: speed_double needs at least 3 frames, got {seq.n_frames}")
    mask = None if seq.missing_mask is None else seq.missing_mask[::2].copy()
    return seq.replace(id=seq.id + "_fast", frames=seq.frames[::2].copy(), missing_mask=mask)


def speed_half(seq: SkeletonSequence) -> SkeletonSequence:
    """Insert the joint-wise midpoint between every pair of frames (2N - 1 frames)."""
    f = seq.frames
    n = f.shape[0]
    out = np.empty((2 * n - 1,) + f.shape[1:])
    out[0::2] = f
    out[1::2] = 0.5 * (f[:-1] + f[1:])
    mask = None
    if seq.missing_mask is not None:
        m = seq.missing_mask
        mask = np.empty((2 * n - 1, m.shape[1]), dtype=bool)
        mask[0::2] = m
        mask[1::2] = m[:-1] | m[1:]
    return seq.replace(id=seq.id + "_slow", frames=out, missing_mask=mask)
