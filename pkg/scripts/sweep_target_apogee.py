#!/usr/bin/env python3
"""Sweep the target apogee and report the dataset's Open-label fraction.

Useful when retuning the rocket constants: the training recipe assumes a
minority Open class (roughly 5-20%), and this shows how the label balance
moves with the deployment threshold.

Usage:
    python scripts/sweep_target_apogee.py [--targets 3500 3600 3700 3800]
"""

import argparse
from dataclasses import replace

from airbrake_surrogate import dataset as ds
from airbrake_surrogate import flight
from airbrake_surrogate.config import RunConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--targets", type=float, nargs="+",
                    default=[3400, 3500, 3600, 3700, 3800, 3900])
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()

    cfg = RunConfig()
    flights = flight.generate_flight_batch(
        cfg.rocket, cfg.sim.n_flights, cfg.sim.alt0_range, cfg.sim.v0_range,
        cfg.sim.h, args.seed,
    )
    print(f"{'target_m':>10} {'n_samples':>10} {'open_frac':>10}")
    for target in args.targets:
        rocket = replace(cfg.rocket, target_apogee=target)
        samples = ds.extract_samples(flights, rocket, cfg.sim.h_predict,
                                     cfg.sim.sample_stride)
        print(f"{target:>10.0f} {len(samples):>10} {samples.open_fraction():>10.4f}")


if __name__ == "__main__":
    main()
