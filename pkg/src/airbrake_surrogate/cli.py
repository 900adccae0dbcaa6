"""Command-line entry point wiring the pipeline together.

Subcommands: generate, train, evaluate, simulate, benchmark, gradcheck.
Exit codes: 0 success, 2 config/validation error, 3 I/O or file-format
error, 4 numerical divergence.
"""

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import dataset as ds
from . import evalbench, flight, neuralnet, pipeline
from .config import ConfigError, RunConfig, load_config
from .integrator import IntegrationDivergedError, MaxStepsExceededError

EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_DIVERGED = 4


def _load_run_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "epochs", None) is not None:
        cfg = replace(cfg, train=replace(cfg.train, epochs=args.epochs))
    return cfg


def _set_threads(n: int) -> None:
    # internal parallelism is opt-in; 1 keeps runs reproducible by default
    try:
        from threadpoolctl import threadpool_limits
        threadpool_limits(limits=n)
    except ImportError:
        pass


def cmd_generate(args) -> int:
    cfg = _load_run_config(args)
    samples, summary = pipeline.generate_dataset(cfg)
    out = Path(args.out or cfg.paths.dataset)
    ds.write_csv(samples, out)
    summary_path = out.with_suffix(".summary.json")
    summary_path.write_text(json.dumps(summary, sort_keys=True, indent=2))
    print(f"wrote {len(samples)} samples to {out} "
          f"(open fraction {samples.open_fraction():.4f})")
    return 0


def cmd_train(args) -> int:
    cfg = _load_run_config(args)
    samples = ds.read_csv(args.data or cfg.paths.dataset)
    mlp, history, _ = pipeline.train_model(cfg, samples)
    out = Path(args.out or cfg.paths.model)
    neuralnet.save_model(mlp, out)
    neuralnet.write_history_csv(history, out.with_suffix(".history.csv"))
    if history:
        print(f"final validation F1: {history[-1].val_f1:.4f} "
              f"(best {max(h.val_f1 for h in history):.4f})")
    print(f"wrote model to {out}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _load_run_config(args)
    mlp = neuralnet.load_model(args.model or cfg.paths.model)
    samples = ds.read_csv(args.data or cfg.paths.dataset)
    report = pipeline.evaluate_on_test(cfg, mlp, samples)
    out = Path(args.out or Path(cfg.paths.reports) / "eval_report.json")
    out.write_text(report.to_json())
    print(f"test F1 {report.f1:.4f}, accuracy {report.accuracy:.4f}; wrote {out}")
    return 0


def cmd_simulate(args) -> int:
    cfg = _load_run_config(args)
    if args.controller == "mlp" and not args.model:
        raise ConfigError("--model", "required when --controller mlp")
    rng = np.random.default_rng(cfg.seed)
    alt0 = rng.uniform(*cfg.sim.alt0_range)
    v0 = rng.uniform(*cfg.sim.v0_range)
    initial = flight.FlightState(t=0.0, altitude=alt0, v_vertical=v0)
    if args.controller == "oracle":
        controller = flight.oracle_controller(cfg.rocket, cfg.sim.h_predict)
    elif args.controller == "always-closed":
        controller = flight.always_closed_controller()
    else:
        mlp = neuralnet.load_model(args.model)
        controller = lambda state: bool(
            neuralnet.predict(mlp, np.array([state.altitude, state.v_vertical, *state.accel]))
        )
    traj = flight.simulate_flight(cfg.rocket, initial, cfg.sim.h, controller, seed=cfg.seed)
    out = Path(args.out or Path(cfg.paths.reports) / "trajectory.csv")
    flight.write_trajectory_csv(traj, out)
    print(f"apogee {traj.apogee:.2f} m at t={traj.apogee_time:.2f} s "
          f"(target {cfg.rocket.target_apogee:.0f} m); wrote {out}")
    return 0


def cmd_benchmark(args) -> int:
    cfg = _load_run_config(args)
    mlp = neuralnet.load_model(args.model or cfg.paths.model)
    # sample ascending states from one representative coast
    mid = flight.FlightState(
        t=0.0,
        altitude=0.5 * sum(cfg.sim.alt0_range),
        v_vertical=0.5 * sum(cfg.sim.v0_range),
    )
    traj = flight.simulate_flight(
        cfg.rocket, mid, cfg.sim.h, flight.always_closed_controller(), seed=cfg.seed
    )
    ascending = [s for s in traj.samples if s.v_vertical > 0]
    states = ascending[:: max(1, len(ascending) // args.states)][: args.states]
    report = evalbench.benchmark(
        mlp, cfg.rocket, states, cfg.sim.h_predict, repetitions=args.repetitions
    )
    out = Path(args.out or Path(cfg.paths.reports) / "bench_report.json")
    out.write_text(report.to_json())
    print(f"nn_macs {report.nn_macs}, rk4 rhs evals {report.rk4_rhs_evals} "
          f"({report.steps_per_oracle_call:.1f} steps/call); wrote {out}")
    return 0


def cmd_gradcheck(args) -> int:
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    mlp = neuralnet.init_mlp(int(rng.integers(2**31)), layer_dims=[5, 8, 4, 2])
    # jitter the zero biases so no ReLU pre-activation sits exactly on its
    # kink, where central differences see only a one-sided derivative
    for b in mlp.biases:
        b += rng.normal(0.0, 0.1, size=b.shape)
    x = rng.normal(size=(16, 5))
    y = rng.integers(0, 2, size=16)
    weights = np.array([0.90, 0.05])
    gw, gb, _ = neuralnet.backward(mlp, x, y, weights)
    fw, fb = neuralnet.finite_difference_gradients(mlp, x, y, weights)
    worst = 0.0
    for g, f in zip(gw + gb, fw + fb):
        denom = np.maximum(np.abs(f), 1e-8)
        worst = max(worst, float(np.max(np.abs(g - f) / denom)))
    print(f"max relative error backprop vs central differences: {worst:.3e}")
    if worst >= 1e-4:
        print("FAIL: gradient mismatch")
        return EXIT_DIVERGED
    print("PASS")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="airbrake-sim",
        description="RK4 airbrake oracle, MLP surrogate trainer, and benchmark harness",
    )
    parser.add_argument("--threads", type=int, default=1,
                        help="BLAS thread cap (default 1 for reproducibility)")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        p.add_argument("--config", help="JSON run configuration file")
        if seed:
            p.add_argument("--seed", type=int, help="override the global seed")
        p.add_argument("--out", help="output path")

    p = sub.add_parser("generate", help="simulate flights and write the labeled dataset CSV")
    common(p)
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("train", help="train the MLP surrogate on a dataset CSV")
    common(p)
    p.add_argument("--data", help="dataset CSV (default from config paths)")
    p.add_argument("--epochs", type=int, help="override training epochs")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a model on the test split")
    common(p)
    p.add_argument("--model", help="model JSON path")
    p.add_argument("--data", help="dataset CSV path")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("simulate", help="run one closed-loop flight and write its trajectory CSV")
    common(p)
    p.add_argument("--controller", choices=["oracle", "mlp", "always-closed"],
                   default="oracle")
    p.add_argument("--model", help="model JSON (required for --controller mlp)")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("benchmark", help="op-count and latency comparison of MLP vs RK4 oracle")
    common(p)
    p.add_argument("--model", help="model JSON path")
    p.add_argument("--states", type=int, default=20, help="number of probe states")
    p.add_argument("--repetitions", type=int, default=50)
    p.set_defaults(fn=cmd_benchmark)

    p = sub.add_parser("gradcheck", help="finite-difference check of backprop gradients")
    p.add_argument("--seed", type=int)
    p.set_defaults(fn=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _set_threads(args.threads)
    try:
        return args.fn(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ds.CsvSchemaError, ds.CsvParseError, neuralnet.ModelFileError) as e:
        print(f"file format error: {e}", file=sys.stderr)
        return EXIT_IO
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except (IntegrationDivergedError, MaxStepsExceededError,
            neuralnet.TrainingDivergedError) as e:
        print(f"numerical divergence: {e}", file=sys.stderr)
        return EXIT_DIVERGED
    except ValueError as e:
        print(f"validation error: {e}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
