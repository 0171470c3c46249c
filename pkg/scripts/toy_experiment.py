#!/usr/bin/env python3
"""Toy-scale retrieval experiment on the procedural 8-class motion set.

Trains the supervised and self-supervised encoders, reports leave-one-out
top-1/top-10 on the held-out performers, and optionally runs the joint
dropout, speed-invariance and sub-motion studies. Writes report files for
each regime into --out.

    python3 scripts/toy_experiment.py --out runs/toy --dropout --submotion
"""

from __future__ import annotations

import argparse
import json
import time
from dataclasses import asdict, replace
from pathlib import Path

import torch

from motionsig.evaluation import build_report, emit_report, make_queries, pr_curve
from motionsig.experiments import (
    ToySetup,
    prepare_toy_data,
    retrieval_scores,
    speed_invariance,
    submotion_experiment,
    train_regime,
)
from motionsig.model import save_params
from motionsig.training import Regime


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/toy")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--max-epochs", type=int, default=50)
    ap.add_argument("--regimes", default="supervised,self")
    ap.add_argument("--dropout", action="store_true", help="also train with 20%% of joints dropped")
    ap.add_argument("--submotion", action="store_true", help="also train the sub-motion encoder")
    ap.add_argument("--submotion-epochs", type=int, default=250)
    ap.add_argument("--dtw", action="store_true", help="fill DTW columns (slow)")
    args = ap.parse_args()

    torch.set_num_threads(1)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    setup = ToySetup(seed=args.seed, max_epochs=args.max_epochs)
    data = prepare_toy_data(setup)
    results = {"setup": asdict(setup)}
    models = {}

    for name in args.regimes.split(","):
        regime = Regime(name)
        t0 = time.perf_counter()
        model, log = train_regime(setup, data, regime,
                                  progress=lambda r: print(f"[{name}] epoch {r.epoch} "
                                                           f"loss {r.mean_contrastive:.4f} val {r.val_top1:.3f}"))
        scores, index = retrieval_scores(model, data)
        models[name] = (model, index)
        rdir = out / name
        rdir.mkdir(exist_ok=True)
        save_params(model, rdir / "model.prm")
        log.write_csv(rdir / "train_log.csv")
        queries = make_queries(model, data.test)
        repo = {s.id: s for s in data.everything} if args.dtw else None
        report = build_report(index, queries, 10, repo, {s.id: s for s in data.test} if args.dtw else None)
        emit_report(report, pr_curve(index, queries), rdir)
        inv = speed_invariance(model, data, index)
        results[name] = {"top1": scores.top1, "top10": scores.top10, "epochs": len(log.records),
                         "best_epoch": log.best_epoch, "seconds": time.perf_counter() - t0,
                         "speed_median_rank": inv.median_rank, "speed_fraction_beaten": inv.mean_fraction_beaten}
        print(name, results[name])

    if args.dropout:
        noisy_setup = replace(setup, dropout=0.2)
        noisy = prepare_toy_data(noisy_setup)
        model, log = train_regime(noisy_setup, noisy, Regime.SUPERVISED)
        scores, _ = retrieval_scores(model, noisy)
        results["supervised_dropout_0.2"] = {"top1": scores.top1, "top10": scores.top10, "epochs": len(log.records)}
        print("dropout", results["supervised_dropout_0.2"])

    if args.submotion and "supervised" in models:
        sub_scores, sub, _ = submotion_experiment(models["supervised"][0], data, setup,
                                                  epochs=args.submotion_epochs, k=5, train_on="all")
        save_params(sub, out / "submotion.prm")
        results["submotion"] = asdict(sub_scores)
        print("submotion", results["submotion"])

    (out / "results.json").write_text(json.dumps(results, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
