"""Recurrent signature encoder, Siamese losses and the parameter file format."""

from __future__ import annotations

import struct
import zlib
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import torch
from torch import nn
from torch.nn.utils.rnn import pack_padded_sequence, pad_packed_sequence, pad_sequence

from .errors import ConfigError, LoadError, ShapeError, ValidationError
from .features import PairLabel

PARAM_MAGIC = b"MSIGPRM\x00"
PARAM_VERSION = 1

_CELLS = {"gru": nn.GRU, "lstm": nn.LSTM, "rnn": nn.RNN}


@dataclass(frozen=True)
class EncoderConfig:
    input_width: int
    hidden_size: int = 256
    num_recurrent_layers: int = 2
    embedding_dim: int = 512
    class_count: Optional[int] = None
    cell: str = "gru"
    readout: str = "last"

    def __post_init__(self):
        for name in ("input_width", "hidden_size", "num_recurrent_layers", "embedding_dim"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.class_count is not None and self.class_count < 1:
            raise ConfigError("class_count must be positive when set")
        if self.cell not in _CELLS:
            raise ConfigError(f"unknown recurrent cell {self.cell!r}")
        if self.readout not in ("last", "mean"):
            raise ConfigError(f"unknown readout {self.readout!r}")

    def to_items(self) -> dict[str, str]:
        return {k: "" if v is None else str(v) for k, v in asdict(self).items()}

    @classmethod
    def from_items(cls, items: dict[str, str]) -> "EncoderConfig":
        kw = {}
        for f in fields(cls):
            if f.name not in items:
                continue
            raw = items[f.name]
            if f.name in ("cell", "readout"):
                kw[f.name] = raw
            elif f.name == "class_count":
                kw[f.name] = int(raw) if raw not in ("", "None") else None
            else:
                kw[f.name] = int(raw)
        return cls(**kw)


@dataclass(frozen=True)
class LossConfig:
    margin: float = 1.0
    contrastive_weight: float = 1.0
    classification_weight: float = 0.0

    def __post_init__(self):
        if not self.margin > 0:
            raise ConfigError("margin must be positive")
        if self.contrastive_weight < 0 or self.classification_weight < 0:
            raise ConfigError("loss weights must be non-negative")


class SignatureEncoder(nn.Module):
    """Stacked recurrent layers, final-state readout, linear projection.

    An optional linear head maps the embedding to class logits.
    """

    def __init__(self, config: EncoderConfig):
        super().__init__()
        self.config = config
        self.rnn = _CELLS[config.cell](
            config.input_width, config.hidden_size, config.num_recurrent_layers, batch_first=True
        )
        self.proj = nn.Linear(config.hidden_size, config.embedding_dim)
        self.head = nn.Linear(config.embedding_dim, config.class_count) if config.class_count else None
        self.trained = False
        self.submotion = False

    @property
    def dtype(self) -> torch.dtype:
        return self.proj.weight.dtype

    def forward(self, inputs: Sequence[torch.Tensor]) -> torch.Tensor:
        """Embed a list of (N_i, input_width) tensors; returns (B, embedding_dim)."""
        lengths = torch.tensor([x.shape[0] for x in inputs])
        padded = pad_sequence(list(inputs), batch_first=True)
        packed = pack_padded_sequence(padded, lengths, batch_first=True, enforce_sorted=False)
        out, h = self.rnn(packed)
        if self.config.readout == "last":
            if isinstance(h, tuple):
                h = h[0]
            state = h[-1]
        else:
            seq_out, lens = pad_packed_sequence(out, batch_first=True)
            state = seq_out.sum(dim=1) / lens.to(seq_out.dtype)[:, None]
        return self.proj(state)

    def logits(self, emb: torch.Tensor) -> torch.Tensor:
        if self.head is None:
            raise ConfigError("encoder has no classification head (class_count unset)")
        return self.head(emb)


def build_encoder(config: EncoderConfig, seed: int, dtype=torch.float32) -> SignatureEncoder:
    gen_state = torch.random.get_rng_state()
    torch.manual_seed(seed)
    try:
        model = SignatureEncoder(config).to(dtype)
    finally:
        torch.random.set_rng_state(gen_state)
    return model


def _check_input(config: EncoderConfig, x: np.ndarray) -> None:
    if x.ndim != 2 or x.shape[1] != config.input_width:
        raise ShapeError(f"encoder expects rows of width {config.input_width}, got shape {x.shape}")
    if x.shape[0] < 2:
        raise ValidationError("encoder input needs at least 2 frames")
    if not np.all(np.isfinite(x)):
        raise ValidationError("encoder input contains non-finite values")


def to_tensors(model: SignatureEncoder, xs) -> list[torch.Tensor]:
    out = []
    for x in xs:
        x = np.asarray(x)
        _check_input(model.config, x)
        out.append(torch.as_tensor(x, dtype=model.dtype))
    return out


@torch.no_grad()
def encode(model: SignatureEncoder, x: np.ndarray) -> np.ndarray:
    """Signature of one encoder input, as a float64 copy of the model's output."""
    (t,) = to_tensors(model, [x])
    was_training = model.training
    model.eval()
    try:
        return model([t])[0].numpy().astype(np.float64)
    finally:
        model.train(was_training)


def encode_many(model: SignatureEncoder, xs) -> np.ndarray:
    """One-at-a-time encoding so each signature is independent of batch composition."""
    if len(xs) == 0:
        return np.zeros((0, model.config.embedding_dim))
    return np.stack([encode(model, x) for x in xs])


# -- losses -------------------------------------------------------------------


def _safe_distance(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    sq = ((a - b) ** 2).sum(dim=-1)
    pos = sq > 0
    return torch.where(pos, torch.sqrt(torch.where(pos, sq, torch.ones_like(sq))), torch.zeros_like(sq))


def contrastive_terms(ea: torch.Tensor, eb: torch.Tensor, similar: torch.Tensor, margin: float) -> torch.Tensor:
    """Per-pair loss: similar -> D^2 / 2, dissimilar -> max(0, m - D)^2 / 2."""
    sq = ((ea - eb) ** 2).sum(dim=-1)
    d = _safe_distance(ea, eb)
    pull = 0.5 * sq
    push = 0.5 * torch.clamp(margin - d, min=0.0) ** 2
    return torch.where(similar, pull, push)


def contrastive_loss(sig_a, sig_b, label: PairLabel, m: float = 1.0) -> float:
    a = torch.as_tensor(np.asarray(sig_a, dtype=np.float64))
    b = torch.as_tensor(np.asarray(sig_b, dtype=np.float64))
    if a.shape != b.shape or a.ndim != 1:
        raise ShapeError(f"signature shapes differ: {tuple(a.shape)} vs {tuple(b.shape)}")
    if not m > 0:
        raise ValidationError("margin must be positive")
    similar = torch.tensor(PairLabel(label) == PairLabel.SIMILAR)
    return float(contrastive_terms(a, b, similar, m))


def classification_loss(logits, true_class: int) -> float:
    """Negative log of the softmax probability of ``true_class``."""
    z = np.asarray(logits, dtype=np.float64)
    if not 0 <= true_class < z.shape[0]:
        raise ValidationError(f"class {true_class} outside [0, {z.shape[0]})")
    t = torch.as_tensor(z)
    return float(-torch.log_softmax(t, dim=0)[true_class])


@dataclass
class PairBatch:
    """Encoder inputs for the distinct sequences in a batch plus pair indices into them."""

    inputs: list  # arrays (N_i, width)
    pairs: np.ndarray  # (B, 2) int
    similar: np.ndarray  # (B,) bool
    classes: Optional[np.ndarray] = None  # (len(inputs),) int, -1 where unknown


def batch_loss(model: SignatureEncoder, batch: PairBatch, config: LossConfig, tensors=None):
    """(total, contrastive mean, classification mean) for one batch.

    Both pair members go through the same module, so the two towers share
    every parameter by construction.
    """
    if len(batch.pairs) == 0:
        raise ValidationError("empty pair batch")
    xs = tensors if tensors is not None else to_tensors(model, batch.inputs)
    emb = model(xs)
    pairs = torch.as_tensor(np.asarray(batch.pairs), dtype=torch.long)
    similar = torch.as_tensor(np.asarray(batch.similar, dtype=bool))
    con = contrastive_terms(emb[pairs[:, 0]], emb[pairs[:, 1]], similar, config.margin).mean()
    total = config.contrastive_weight * con
    cls = torch.zeros((), dtype=emb.dtype)
    if config.classification_weight > 0:
        if batch.classes is None:
            raise ConfigError("classification loss requested but batch carries no class labels")
        classes = torch.as_tensor(np.asarray(batch.classes), dtype=torch.long)
        known = classes >= 0
        if known.any():
            logp = torch.log_softmax(model.logits(emb[known]), dim=1)
            cls = -logp.gather(1, classes[known][:, None]).mean()
        total = total + config.classification_weight * cls
    return total, con, cls


def loss_gradients(model: SignatureEncoder, batch: PairBatch, config: LossConfig) -> dict[str, np.ndarray]:
    """Exact gradients of the batch loss with respect to every named parameter."""
    model.zero_grad(set_to_none=True)
    total, _, _ = batch_loss(model, batch, config)
    params = dict(model.named_parameters())
    grads = torch.autograd.grad(total, list(params.values()), allow_unused=True)
    return {
        name: (np.zeros(p.shape) if g is None else g.detach().numpy().astype(np.float64))
        for (name, p), g in zip(params.items(), grads)
    }


# -- parameter file -----------------------------------------------------------
#
# magic(8) | u32 version | u32 header_len | header utf-8 "key=value\n" lines
# | u32 tensor_count | per tensor: u16 name_len, name, u8 ndim, u32 dims...,
#   float32 LE data | u32 crc32 of everything before it


def save_params(model: SignatureEncoder, path) -> None:
    items = model.config.to_items()
    items["trained"] = str(bool(model.trained)).lower()
    items["submotion"] = str(bool(model.submotion)).lower()
    header = "".join(f"{k}={v}\n" for k, v in items.items()).encode()
    buf = bytearray(PARAM_MAGIC)
    buf += struct.pack("<II", PARAM_VERSION, len(header)) + header
    state = model.state_dict()
    buf += struct.pack("<I", len(state))
    for name, t in state.items():
        arr = t.detach().cpu().numpy().astype("<f4")
        raw = name.encode()
        buf += struct.pack("<H", len(raw)) + raw
        buf += struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape)
        buf += arr.tobytes(order="C")
    buf += struct.pack("<I", zlib.crc32(bytes(buf)))
    Path(path).write_bytes(bytes(buf))


def read_param_header(path) -> dict[str, str]:
    data = Path(path).read_bytes()
    if len(data) < 16 or data[:8] != PARAM_MAGIC:
        raise LoadError(f"{path}: not a parameter file")
    version, hlen = struct.unpack_from("<II", data, 8)
    if version != PARAM_VERSION:
        raise LoadError(f"{path}: unsupported parameter format version {version}")
    if 16 + hlen > len(data):
        raise LoadError(f"{path}: truncated header")
    items = {}
    for line in data[16 : 16 + hlen].decode(errors="replace").splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            items[k] = v
    return items


def load_params(path, expected: Optional[EncoderConfig] = None) -> SignatureEncoder:
    """Rebuild an encoder from a parameter file; nothing is returned on any error."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise LoadError(str(exc)) from None
    if len(data) < 20 or data[:8] != PARAM_MAGIC:
        raise LoadError(f"{path}: not a parameter file")
    (crc,) = struct.unpack_from("<I", data, len(data) - 4)
    if zlib.crc32(data[:-4]) != crc:
        raise LoadError(f"{path}: checksum mismatch (truncated or corrupt)")
    items = read_param_header(path)
    hlen = struct.unpack_from("<I", data, 12)[0]
    try:
        config = EncoderConfig.from_items(items)
    except (ValueError, TypeError) as exc:
        raise LoadError(f"{path}: bad encoder config in header: {exc}") from None
    if expected is not None and config != expected:
        raise ConfigError(f"{path}: stored config {config} differs from expected {expected}")
    model = SignatureEncoder(config)
    state = model.state_dict()
    off = 16 + hlen
    try:
        (count,) = struct.unpack_from("<I", data, off)
        off += 4
        if count != len(state):
            raise LoadError(f"{path}: expected {len(state)} tensors, file has {count}")
        loaded = {}
        for _ in range(count):
            (nlen,) = struct.unpack_from("<H", data, off)
            off += 2
            name = data[off : off + nlen].decode()
            off += nlen
            (ndim,) = struct.unpack_from("<B", data, off)
            off += 1
            shape = struct.unpack_from(f"<{ndim}I", data, off)
            off += 4 * ndim
            size = int(np.prod(shape)) * 4
            if off + size > len(data) - 4:
                raise LoadError(f"{path}: truncated tensor {name}")
            arr = np.frombuffer(data, dtype="<f4", count=size // 4, offset=off).reshape(shape)
            off += size
            if name not in state or tuple(state[name].shape) != tuple(shape):
                raise LoadError(f"{path}: unexpected tensor {name} {shape}")
            loaded[name] = torch.from_numpy(arr.astype(np.float32))
    except struct.error:
        raise LoadError(f"{path}: truncated payload") from None
    if off != len(data) - 4:
        raise LoadError(f"{path}: trailing bytes after tensors")
    model.load_state_dict(loaded)
    model.trained = items.get("trained") == "true"
    model.submotion = items.get("submotion") == "true"
    return model
