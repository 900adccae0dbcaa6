#!/usr/bin/env python3
"""Run the full generate -> train -> evaluate pipeline and save every
artifact (dataset, model, history, eval report) into an output directory.

Usage:
    python scripts/run_pipeline.py [--config cfg.json] [--seed 42] [--out runs/exp1]
"""

import argparse
import json
import time
from dataclasses import replace
from pathlib import Path

from airbrake_surrogate import dataset as ds
from airbrake_surrogate import neuralnet, pipeline
from airbrake_surrogate.config import RunConfig, load_config


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", type=Path, default=None)
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--out", type=Path, default=Path("run_output"))
    args = ap.parse_args()

    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    args.out.mkdir(parents=True, exist_ok=True)

    t0 = time.time()
    samples, summary = pipeline.generate_dataset(cfg)
    ds.write_csv(samples, args.out / "dataset.csv")
    print(f"dataset: {len(samples)} samples, open fraction {samples.open_fraction():.3f}")

    mlp, history, _ = pipeline.train_model(cfg, samples)
    neuralnet.save_model(mlp, args.out / "model.json")
    neuralnet.write_history_csv(history, args.out / "history.csv")
    best = max((h.val_f1 for h in history), default=float("nan"))
    print(f"training done, best validation F1 {best:.4f}")

    report = pipeline.evaluate_on_test(cfg, mlp, samples)
    (args.out / "eval_report.json").write_text(report.to_json())
    doc = json.loads(report.to_json())
    print(f"test split: F1 {doc['f1']:.4f}, accuracy {doc['accuracy']:.4f}")
    (args.out / "summary.json").write_text(json.dumps(summary, indent=2))
    print(f"total {time.time() - t0:.0f}s, artifacts in {args.out}/")


if __name__ == "__main__":
    main()
