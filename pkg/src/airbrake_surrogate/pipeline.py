"""End-to-end pipeline used by both the CLI and the test suite:
generate -> split/scale/SMOTE -> train -> evaluate. Everything is driven by
a RunConfig and the single global seed; identical configs reproduce
identical artifacts byte for byte.
"""

from typing import List, Tuple

from . import dataset as ds
from . import flight, neuralnet
from .config import RunConfig
from .evalbench import EvalReport, evaluate_model

# fixed offsets so each stage draws from an independent stream
SPLIT_SEED_OFFSET = 101
SMOTE_SEED_OFFSET = 202
INIT_SEED_OFFSET = 303
TRAIN_SEED_OFFSET = 404


def generate_dataset(cfg: RunConfig) -> Tuple[ds.SampleSet, dict]:
    """Simulated coast flights -> oracle-labeled samples plus a summary."""
    flights = flight.generate_flight_batch(
        cfg.rocket,
        cfg.sim.n_flights,
        cfg.sim.alt0_range,
        cfg.sim.v0_range,
        cfg.sim.h,
        cfg.seed,
    )
    samples = ds.extract_samples(flights, cfg.rocket, cfg.sim.h_predict, cfg.sim.sample_stride)
    summary = {
        "n_samples": len(samples),
        "n_flights": cfg.sim.n_flights,
        "class_ratio_open": samples.open_fraction(),
        "seed": cfg.seed,
        "config": cfg.to_dict(),
    }
    return samples, summary


def prepare_training_data(
    cfg: RunConfig, samples: ds.SampleSet
) -> Tuple[ds.SplitDataset, ds.Scaler]:
    """Stratified 7:2:1 split, scaler fit on the train split only, SMOTE
    balancing of the train split only (neighbors measured in scaled space)."""
    split = ds.split_dataset(samples, cfg.seed + SPLIT_SEED_OFFSET)
    scaler = ds.fit_scaler(split.train)
    train = split.train
    if cfg.dataset.use_smote:
        train = ds.smote_oversample(
            train, cfg.dataset.smote_k, cfg.seed + SMOTE_SEED_OFFSET, scaler
        )
    balanced = ds.SplitDataset(
        train=train, validation=split.validation, test=split.test, seed=split.seed
    )
    return balanced, scaler


def train_model(
    cfg: RunConfig, samples: ds.SampleSet
) -> Tuple[neuralnet.Mlp, List[neuralnet.EpochRecord], ds.SplitDataset]:
    split, scaler = prepare_training_data(cfg, samples)
    train_cfg = neuralnet.TrainConfig(
        **{
            **cfg.train.__dict__,
            "seed": cfg.seed + TRAIN_SEED_OFFSET,
        }
    )
    mlp = neuralnet.init_mlp(cfg.seed + INIT_SEED_OFFSET, scaler=scaler)
    trained, history = neuralnet.train(mlp, split, train_cfg)
    return trained, history, split


def evaluate_on_test(cfg: RunConfig, mlp: neuralnet.Mlp, samples: ds.SampleSet) -> EvalReport:
    """Re-derives the test split from the seed so evaluation never needs the
    split to have been persisted."""
    split = ds.split_dataset(samples, cfg.seed + SPLIT_SEED_OFFSET)
    return evaluate_model(mlp, split.test)
