"""Command-line entry point: ``motionsig <command> ...``.

Settings resolve as built-in default, then the ``--config`` file (flat
``key=value`` lines), then explicit flags. Each run writes ``run.lock`` with
the resolved settings next to its outputs. Exit codes: 0 success, 1 bad
input or configuration, 2 numerical or runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import torch

from .errors import ConfigError, DatasetError, MotionSigError, NumericalError
from .evaluation import build_report, emit_report, make_queries, pr_curve
from .features import build_encoder_input, encoder_input_width
from .index import benchmark_query_latency, build_index, load_index, save_index
from .model import EncoderConfig, LossConfig, encode, load_params, save_params
from .motion_data import (
    DatasetManifest,
    ManifestEntry,
    drop_joints,
    load_sequence,
    mean_bone_lengths,
    normalize_bone_lengths,
    read_manifest,
    read_topology,
    save_sequence,
    speed_double,
    speed_half,
    write_manifest,
    write_topology,
)
from .submotion import DEFAULT_FRACTIONS, query_submotion, train_submotion
from .synth import default_spec, synth_generate
from .training import Regime, TrainConfig, train

SEED_ENV = "DEEPHUMS_SEED"


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; 2 is reserved for runtime failures here
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"ERROR: {message}", file=sys.stderr)
        raise SystemExit(1)


# -- settings -----------------------------------------------------------------


def read_config(path: Optional[str]) -> dict[str, str]:
    if not path:
        return {}
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        k, v = line.split("=", 1)
        out[k.strip().replace("-", "_")] = v.strip()
    return out


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in str(text).split(",") if x.strip())


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    low = str(text).lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


# name -> (parser, default); a callable default is evaluated lazily
SETTINGS: dict[str, tuple[Callable, object]] = {
    "seed": (int, _default_seed),
    "regime": (str, "self"),
    "batch_size": (int, 8),
    "learning_rate": (float, 1e-3),
    "max_epochs": (int, 50),
    "patience": (int, 10),
    "val_fraction": (float, 0.1),
    "margin": (float, 1.0),
    "contrastive_weight": (float, 1.0),
    "classification_weight": (float, None),
    "alpha": (float, 1.0),
    "beta": (float, 1.0),
    "hidden_size": (int, 256),
    "num_recurrent_layers": (int, 2),
    "embedding_dim": (int, 512),
    "cell": (str, "gru"),
    "k": (int, 10),
    "n": (int, 10),
    "dtw_k": (int, None),
    "window_fractions": (_floats, DEFAULT_FRACTIONS),
    "stride_fraction": (float, 0.5),
    "init": (str, "copy"),
    "dropout": (float, None),
    "speeds": (_bool, True),
    "split": (str, None),
    "latency_repeats": (int, 1),
}


def resolve(args: argparse.Namespace, keys) -> dict:
    config = read_config(getattr(args, "config", None))
    unknown = set(config) - set(SETTINGS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    out = {}
    for key in keys:
        parse, default = SETTINGS[key]
        flag = getattr(args, key, None)
        if flag is not None:
            out[key] = parse(flag) if not isinstance(flag, (bool, tuple)) else flag
        elif key in config:
            try:
                out[key] = parse(config[key])
            except ValueError:
                raise ConfigError(f"config key {key}: bad value {config[key]!r}") from None
        else:
            out[key] = default() if callable(default) else default
    return out


def write_lock(out_dir: Path, command: str, settings: dict, inputs: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = [f"command={command}"]
    lines += [f"{k}={v}" for k, v in sorted(inputs.items())]
    for k, v in sorted(settings.items()):
        if isinstance(v, tuple):
            v = ",".join(f"{x:g}" for x in v)
        lines.append(f"{k}={v}")
    (out_dir / "run.lock").write_text("\n".join(lines) + "\n")


def _with_mask(model, joint_count: int) -> bool:
    return model.config.input_width == encoder_input_width(joint_count, True)


def _load_split(manifest_path: str, topology_path: str, split: Optional[str]):
    topology = read_topology(topology_path)
    manifest = read_manifest(manifest_path)
    return manifest.load(topology, None if split in (None, "all") else split)


def _check_joints(model, seqs) -> None:
    if not seqs:
        return
    J = seqs[0].joint_count
    if model.config.input_width not in (encoder_input_width(J, False), encoder_input_width(J, True)):
        raise ConfigError(
            f"parameters expect input width {model.config.input_width}, sequences have {J} joints"
        )


def _write_hits(path: Path, hits) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rank", "id", "distance", "class_label"])
        for r, h in enumerate(hits, start=1):
            w.writerow([r, h.id, f"{h.distance:.9g}", "" if h.class_label is None else h.class_label])


def _print_hits(hits) -> None:
    for r, h in enumerate(hits, start=1):
        label = "-" if h.class_label is None else h.class_label
        print(f"{r}\t{h.id}\t{h.distance:.6g}\t{label}")


# -- commands -------------------------------------------------------------------


def cmd_synth(args) -> int:
    s = resolve(args, ["seed"])
    out = Path(args.out)
    (out / "sequences").mkdir(parents=True, exist_ok=True)
    spec = default_spec((args.min_length, args.max_length))
    seqs = synth_generate(spec, args.per_class, s["seed"])
    test = set(filter(None, args.test_performers.split(",")))
    write_topology(seqs[0].topology, out / "topology.txt")
    entries = []
    for q in seqs:
        rel = f"sequences/{q.id}.skel"
        save_sequence(q, out / rel)
        entries.append(ManifestEntry(rel, q.id, q.class_label, q.performer_id,
                                     "test" if q.performer_id in test else "train"))
    write_manifest(DatasetManifest(entries, out), out / "manifest.tsv")
    write_lock(out, "synth", s, {"per_class": args.per_class, "length_range": f"{args.min_length},{args.max_length}",
                                 "test_performers": args.test_performers})
    print(f"wrote {len(entries)} sequences to {out}")
    return 0


def cmd_ingest(args) -> int:
    topology = read_topology(args.topology)
    manifest = read_manifest(args.manifest)
    out = Path(args.out)
    (out / "sequences").mkdir(parents=True, exist_ok=True)
    loaded, failures = [], []
    for e in manifest.entries:
        try:
            seq = load_sequence(manifest.resolve(e), topology)
        except (MotionSigError, OSError) as exc:
            failures.append((e.id, str(exc)))
            continue
        loaded.append((e, seq.replace(
            id=e.id,
            class_label=e.class_label if e.class_label is not None else seq.class_label,
            performer_id=e.performer_id if e.performer_id is not None else seq.performer_id,
        )))
    canon = None
    if args.normalize:
        if args.canonical_lengths:
            canon = np.array(Path(args.canonical_lengths).read_text().split(), dtype=np.float64)
            if canon.shape != (topology.bone_count,):
                raise ConfigError(f"canonical lengths: expected {topology.bone_count} values, got {canon.size}")
        else:
            ref = [q for e, q in loaded if e.split == "train"] or [q for _, q in loaded]
            if not ref:
                raise DatasetError("no valid sequence to derive canonical bone lengths from")
            canon = mean_bone_lengths(ref)
        (out / "canonical_lengths.txt").write_text("\n".join(f"{x:.17g}" for x in canon) + "\n")
    entries = []
    for e, seq in loaded:
        if canon is not None:
            try:
                seq = normalize_bone_lengths(seq, canon)
            except MotionSigError as exc:
                failures.append((e.id, str(exc)))
                continue
        rel = f"sequences/{e.id}.skel"
        save_sequence(seq, out / rel)
        entries.append(ManifestEntry(rel, e.id, seq.class_label, seq.performer_id, e.split, e.provenance))
    write_topology(topology, out / "topology.txt")
    write_manifest(DatasetManifest(entries, out), out / "manifest.tsv")
    (out / "errors.txt").write_text("".join(f"{i}\t{m}\n" for i, m in failures))
    write_lock(out, "ingest", {}, {"manifest": args.manifest, "topology": args.topology,
                                   "normalize": bool(args.normalize),
                                   "canonical_lengths": args.canonical_lengths or "-"})
    print(f"ingested {len(entries)} sequences, {len(failures)} failed")
    if failures:
        for i, m in failures:
            print(f"ERROR: {i}: {m}", file=sys.stderr)
        return 1
    return 0


def cmd_augment(args) -> int:
    s = resolve(args, ["seed", "speeds", "dropout"])
    if not s["speeds"] and not s["dropout"]:
        raise ConfigError("nothing to do: enable --speeds or pass --dropout")
    topology = read_topology(args.topology)
    manifest = read_manifest(args.manifest)
    out = Path(args.out)
    (out / "sequences").mkdir(parents=True, exist_ok=True)
    entries = []

    def emit(seq, e: ManifestEntry, provenance: str):
        rel = f"sequences/{seq.id}.skel"
        save_sequence(seq, out / rel)
        entries.append(ManifestEntry(rel, seq.id, e.class_label, e.performer_id, e.split, provenance))

    for k, e in enumerate(manifest.entries):
        seq = load_sequence(manifest.resolve(e), topology).replace(id=e.id)
        emit(seq, e, e.provenance or "original")
        if s["speeds"]:
            if seq.n_frames >= 3:
                emit(speed_double(seq), e, f"speed_double:{e.id}")
            emit(speed_half(seq), e, f"speed_half:{e.id}")
        if s["dropout"]:
            seed = int(np.random.SeedSequence([s["seed"], k]).generate_state(1)[0])
            noisy = drop_joints(seq, s["dropout"], seed).replace(id=f"{seq.id}_noisy")
            emit(noisy, e, f"drop_joints({s['dropout']:g}):{e.id}")
    write_topology(topology, out / "topology.txt")
    write_manifest(DatasetManifest(entries, out), out / "manifest.tsv")
    write_lock(out, "augment", s, {"manifest": args.manifest, "topology": args.topology})
    print(f"wrote {len(entries)} entries to {out / 'manifest.tsv'}")
    return 0


TRAIN_KEYS = ["seed", "regime", "batch_size", "learning_rate", "max_epochs", "patience", "val_fraction", "margin",
              "contrastive_weight", "classification_weight", "alpha", "beta", "hidden_size",
              "num_recurrent_layers", "embedding_dim", "cell", "split"]


def cmd_train(args) -> int:
    s = resolve(args, TRAIN_KEYS)
    out = Path(args.out)
    if out.exists() and not args.force:
        raise ConfigError(f"{out} exists; pass --force to overwrite")
    regime = Regime(s["regime"])
    s["split"] = s["split"] or "train"
    seqs = _load_split(args.manifest, args.topology, s["split"])
    if not seqs:
        raise DatasetError("training split is empty")
    supervised = regime == Regime.SUPERVISED
    if supervised and any(q.class_label is None for q in seqs):
        raise ConfigError("supervised regime needs a class label on every training sequence")
    cls_w = s["classification_weight"]
    if cls_w is None:
        cls_w = 1.0 if supervised else 0.0
    s["classification_weight"] = cls_w
    class_count = max(q.class_label for q in seqs) + 1 if supervised and cls_w > 0 else None
    J = seqs[0].joint_count
    with_mask = any(q.missing_mask is not None for q in seqs)
    enc = EncoderConfig(
        input_width=encoder_input_width(J, with_mask),
        hidden_size=s["hidden_size"],
        num_recurrent_layers=s["num_recurrent_layers"],
        embedding_dim=s["embedding_dim"],
        class_count=class_count,
        cell=s["cell"],
    )
    tc = TrainConfig(
        regime=regime,
        batch_size=s["batch_size"],
        learning_rate=s["learning_rate"],
        max_epochs=s["max_epochs"],
        seed=s["seed"],
        patience=s["patience"],
        val_fraction=s["val_fraction"],
        alpha=s["alpha"],
        beta=s["beta"],
        loss=LossConfig(margin=s["margin"], contrastive_weight=s["contrastive_weight"],
                        classification_weight=cls_w),
    )

    def progress(rec):
        print(f"epoch {rec.epoch}\tcontrastive {rec.mean_contrastive:.6g}\t"
              f"classification {rec.mean_classification:.6g}\tval_top1 {rec.val_top1:.4g}", flush=True)

    model, log = train(seqs, enc, tc, progress=None if args.quiet else progress)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_params(model, out)
    log_path = Path(args.log) if args.log else out.with_name(out.name + ".log.csv")
    log.write_csv(log_path)
    inputs = {"manifest": args.manifest, "topology": args.topology, "out": str(out), "log": str(log_path)}
    if log.thresholds is not None:
        inputs["thresholds"] = f"{log.thresholds[0]:.17g},{log.thresholds[1]:.17g}"
    if log.best_epoch is not None:
        inputs["best_epoch"] = log.best_epoch
    write_lock(out.parent, "train", s, inputs)
    print(f"saved {out} (best epoch {log.best_epoch})")
    return 0


def cmd_index(args) -> int:
    s = resolve(args, ["split"])
    model = load_params(args.params)
    s["split"] = s["split"] or "all"
    seqs = _load_split(args.manifest, args.topology, s["split"])
    _check_joints(model, seqs)
    with_mask = bool(seqs) and _with_mask(model, seqs[0].joint_count)
    index = build_index(model, seqs, with_mask)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_index(index, out)
    write_lock(out.parent, "index", s, {"params": args.params, "manifest": args.manifest, "out": str(out)})
    print(f"indexed {len(index)} sequences (dim {index.dim}) into {out}")
    return 0


def _check_dims(model, index) -> None:
    if len(index) and model.config.embedding_dim != index.dim:
        raise ConfigError(f"parameters embed into {model.config.embedding_dim} dims, index holds {index.dim}")


def cmd_query(args) -> int:
    s = resolve(args, ["k"])
    index = load_index(args.index)
    model = load_params(args.params)
    _check_dims(model, index)
    seq = load_sequence(args.sequence, read_topology(args.topology))
    _check_joints(model, [seq])
    sig = encode(model, build_encoder_input(seq, _with_mask(model, seq.joint_count)))
    hits = index.query(sig, s["k"])
    _print_hits(hits)
    out = Path(args.out)
    _write_hits(out, hits)
    write_lock(out.parent, "query", s, {"index": args.index, "params": args.params, "sequence": args.sequence})
    return 0


def cmd_evaluate(args) -> int:
    s = resolve(args, ["n", "dtw_k", "split", "latency_repeats"])
    index = load_index(args.index)
    model = load_params(args.params)
    _check_dims(model, index)
    s["split"] = s["split"] or "test"
    seqs = _load_split(args.manifest, args.topology, s["split"])
    _check_joints(model, seqs)
    queries = make_queries(model, seqs)
    repo = None
    if args.repository:
        repo = {q.id: q for q in _load_split(args.repository, args.topology, "all")}
    report = build_report(index, queries, s["n"], repo, {q.id: q for q in seqs} if repo else None, s["dtw_k"])
    curve = pr_curve(index, queries)
    out = Path(args.out)
    emit_report(report, curve, out)
    # timings vary run to run, so they stay out of the report files
    lat_lines = [f"index_size\t{len(index)}"]
    if queries and len(index):
        stats = benchmark_query_latency(index, [q.signature for q in queries], s["n"], s["latency_repeats"])
        lat_lines += [f"queries\t{len(queries)}", f"mean_ms\t{stats.mean_ms:.6g}", f"p95_ms\t{stats.p95_ms:.6g}"]
    (out / "latency.txt").write_text("\n".join(lat_lines) + "\n")
    write_lock(out, "evaluate", s, {"index": args.index, "params": args.params, "manifest": args.manifest,
                                    "repository": args.repository or "-"})
    print(f"top1 {report.top1:.6g}\ttop{s['n']} {report.topn:.6g}\tmean_dtw_mm {report.mean_dtw_mm:.6g}")
    return 0


def cmd_submotion_train(args) -> int:
    s = resolve(args, ["seed", "batch_size", "learning_rate", "max_epochs", "window_fractions",
                       "stride_fraction", "init", "split"])
    out = Path(args.out)
    if out.exists() and not args.force:
        raise ConfigError(f"{out} exists; pass --force to overwrite")
    full = load_params(args.params)
    s["split"] = s["split"] or "all"
    seqs = _load_split(args.manifest, args.topology, s["split"])
    _check_joints(full, seqs)
    tc = TrainConfig(batch_size=s["batch_size"], learning_rate=s["learning_rate"], max_epochs=s["max_epochs"],
                     seed=s["seed"])
    sub, log = train_submotion(full, seqs, tc, s["window_fractions"], s["stride_fraction"], s["init"])
    out.parent.mkdir(parents=True, exist_ok=True)
    save_params(sub, out)
    log_path = out.with_name(out.name + ".log.csv")
    log.write_csv(log_path)
    write_lock(out.parent, "submotion-train", s, {"params": args.params, "manifest": args.manifest,
                                                  "out": str(out), "log": str(log_path)})
    last = log.records[-1].mean_contrastive if log.records else float("nan")
    print(f"saved {out} (final target loss {last:.6g})")
    return 0


def cmd_submotion_query(args) -> int:
    s = resolve(args, ["k"])
    model = load_params(args.params)
    if not model.submotion:
        raise ConfigError(f"{args.params} is not a submotion parameter file")
    index = load_index(args.index)
    _check_dims(model, index)
    window = load_sequence(args.sequence, read_topology(args.topology))
    _check_joints(model, [window])
    hits = query_submotion(model, window, index, s["k"])
    _print_hits(hits)
    out = Path(args.out)
    _write_hits(out, hits)
    write_lock(out.parent, "submotion-query", s, {"index": args.index, "params": args.params,
                                                  "sequence": args.sequence})
    return 0


# -- parser -------------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value settings file; flags override it")
    p.add_argument("--threads", type=int, default=1, help="torch intra-op threads (determinism needs 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="motionsig", description="Motion signatures: train, index, query and evaluate.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="write the procedural toy dataset")
    _common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--per-class", type=int, default=40)
    p.add_argument("--min-length", type=int, default=15)
    p.add_argument("--max-length", type=int, default=120)
    p.add_argument("--test-performers", default="p8,p9")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="validate and optionally bone-normalize a dataset")
    _common(p)
    p.add_argument("manifest")
    p.add_argument("--topology", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--canonical-lengths")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("augment", help="add speed and joint-dropout variants")
    _common(p)
    p.add_argument("manifest")
    p.add_argument("--topology", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--speeds", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--dropout", type=float)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("train", help="train a signature encoder")
    _common(p)
    p.add_argument("manifest")
    p.add_argument("--topology", required=True)
    p.add_argument("--out", required=True, help="parameter file to write")
    p.add_argument("--regime", choices=[r.value for r in Regime])
    p.add_argument("--split")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", dest="max_epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", dest="learning_rate", type=float)
    p.add_argument("--patience", type=int)
    p.add_argument("--val-fraction", type=float)
    p.add_argument("--margin", type=float)
    p.add_argument("--classification-weight", type=float)
    p.add_argument("--hidden-size", type=int)
    p.add_argument("--layers", dest="num_recurrent_layers", type=int)
    p.add_argument("--embedding-dim", type=int)
    p.add_argument("--cell", choices=["gru", "lstm", "rnn"])
    p.add_argument("--log", help="training log CSV (default: <out>.log.csv)")
    p.add_argument("--force", action="store_true", help="overwrite an existing parameter file")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("index", help="embed a split into an index file")
    _common(p)
    p.add_argument("params")
    p.add_argument("manifest")
    p.add_argument("--topology", required=True)
    p.add_argument("--split", help="train, test or all (default all)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("query", help="retrieve the nearest sequences to one file")
    _common(p)
    p.add_argument("index")
    p.add_argument("params")
    p.add_argument("sequence")
    p.add_argument("--topology", required=True)
    p.add_argument("-k", type=int)
    p.add_argument("--out", default="query_results.csv")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("evaluate", help="top-n, PR curve, DTW and latency on a labeled split")
    _common(p)
    p.add_argument("index")
    p.add_argument("params")
    p.add_argument("manifest")
    p.add_argument("--topology", required=True)
    p.add_argument("--split", help="default test")
    p.add_argument("--out", required=True)
    p.add_argument("-n", type=int)
    p.add_argument("--repository", help="manifest of the indexed sequences; enables DTW columns")
    p.add_argument("--dtw-k", type=int)
    p.add_argument("--latency-repeats", type=int)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("submotion", help="sub-sequence encoder")
    subsub = p.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    t = subsub.add_parser("train", help="regress windows onto a frozen full encoder")
    _common(t)
    t.add_argument("params", help="trained full-sequence parameter file")
    t.add_argument("manifest")
    t.add_argument("--topology", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--split", help="default all")
    t.add_argument("--seed", type=int)
    t.add_argument("--epochs", dest="max_epochs", type=int)
    t.add_argument("--batch-size", type=int)
    t.add_argument("--lr", dest="learning_rate", type=float)
    t.add_argument("--fractions", dest="window_fractions", type=_floats)
    t.add_argument("--stride", dest="stride_fraction", type=float)
    t.add_argument("--init", choices=["copy", "random"])
    t.add_argument("--force", action="store_true")
    t.set_defaults(func=cmd_submotion_train)
    q = subsub.add_parser("query", help="find parents of a window")
    _common(q)
    q.add_argument("params", help="submotion parameter file")
    q.add_argument("index")
    q.add_argument("sequence")
    q.add_argument("--topology", required=True)
    q.add_argument("-k", type=int)
    q.add_argument("--out", default="submotion_results.csv")
    q.set_defaults(func=cmd_submotion_query)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be at least 1")
    torch.set_num_threads(args.threads)
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"ERROR: {exc}", file=sys.stderr)
        return 2
    except (MotionSigError, OSError, ValueError) as exc:
        print(f"ERROR: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
