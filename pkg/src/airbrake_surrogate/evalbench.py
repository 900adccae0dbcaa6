"""Classification metrics, model evaluation reports, and the op-count /
latency benchmark comparing MLP inference against full RK4 apogee
prediction.

Positive class = Open = 1 throughout (F1 references the minority/action
class).
"""

import hashlib
import json
import statistics
import time
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .dataset import SampleSet
from .flight import FlightState, RocketModel, predict_apogee, predict_apogee_counted


class BenchmarkResolutionError(RuntimeError):
    """Timer resolution too coarse: every measured median was zero."""


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    f1: float
    accuracy: float
    degenerate: Tuple[str, ...] = ()


@dataclass
class EvalReport:
    confusion: ConfusionMatrix
    precision: float
    recall: float
    f1: float
    accuracy: float
    degenerate: Tuple[str, ...]
    class_ratio_open: float
    oracle_agreement: float
    n_samples: int
    dataset_fingerprint: str
    model_fingerprint: str

    def to_json(self) -> str:
        doc = {
            "confusion": {"tp": self.confusion.tp, "fp": self.confusion.fp,
                          "tn": self.confusion.tn, "fn": self.confusion.fn},
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "accuracy": self.accuracy,
            "degenerate": list(self.degenerate),
            "class_ratio_open": self.class_ratio_open,
            "oracle_agreement": self.oracle_agreement,
            "n_samples": self.n_samples,
            "dataset_fingerprint": self.dataset_fingerprint,
            "model_fingerprint": self.model_fingerprint,
        }
        return json.dumps(doc, sort_keys=True, indent=2)


@dataclass
class BenchReport:
    nn_macs: int
    rk4_steps_total: int
    rk4_rhs_evals: int
    steps_per_oracle_call: float
    rk4_flops_estimate: int
    n_states: int
    h: float
    repetitions: int
    nn_wall_ns_median: float
    nn_wall_ns_p95: float
    rk4_wall_ns_median: float
    rk4_wall_ns_p95: float

    def to_json(self) -> str:
        doc = {
            "nn_macs": self.nn_macs,
            "rk4_steps_total": self.rk4_steps_total,
            "rk4_rhs_evals": self.rk4_rhs_evals,
            "steps_per_oracle_call": self.steps_per_oracle_call,
            "rk4_flops_estimate": self.rk4_flops_estimate,
            "n_states": self.n_states,
            "h": self.h,
            "repetitions": self.repetitions,
            # wall-clock numbers vary run to run; kept apart so determinism
            # checks can compare everything else byte-wise
            "nondeterministic": {
                "nn_wall_ns_median": self.nn_wall_ns_median,
                "nn_wall_ns_p95": self.nn_wall_ns_p95,
                "rk4_wall_ns_median": self.rk4_wall_ns_median,
                "rk4_wall_ns_p95": self.rk4_wall_ns_p95,
            },
        }
        return json.dumps(doc, sort_keys=True, indent=2)


def confusion(predictions: Sequence[int], labels: Sequence[int]) -> ConfusionMatrix:
    pred = np.asarray(predictions, dtype=np.int64)
    lab = np.asarray(labels, dtype=np.int64)
    if pred.shape != lab.shape:
        raise ValueError("predictions and labels length mismatch")
    if not (np.all((pred == 0) | (pred == 1)) and np.all((lab == 0) | (lab == 1))):
        raise ValueError("entries must be 0 or 1")
    return ConfusionMatrix(
        tp=int(np.sum((pred == 1) & (lab == 1))),
        fp=int(np.sum((pred == 1) & (lab == 0))),
        tn=int(np.sum((pred == 0) & (lab == 0))),
        fn=int(np.sum((pred == 0) & (lab == 1))),
    )


def f1_accuracy(cm: ConfusionMatrix) -> Metrics:
    """precision/recall/F1/accuracy; 0/0 cases are reported as 0 and flagged
    instead of raising."""
    if cm.total == 0:
        raise ValueError("empty confusion matrix")
    degenerate = []
    if cm.tp + cm.fp > 0:
        precision = cm.tp / (cm.tp + cm.fp)
    else:
        precision = 0.0
        degenerate.append("precision")
    if cm.tp + cm.fn > 0:
        recall = cm.tp / (cm.tp + cm.fn)
    else:
        recall = 0.0
        degenerate.append("recall")
    if precision + recall > 0:
        f1 = 2.0 * precision * recall / (precision + recall)
    else:
        f1 = 0.0
        degenerate.append("f1")
    accuracy = (cm.tp + cm.tn) / cm.total
    return Metrics(precision, recall, f1, accuracy, tuple(degenerate))


def _sha256_arrays(arrays: Sequence[np.ndarray]) -> str:
    hasher = hashlib.sha256()
    for a in arrays:
        hasher.update(np.ascontiguousarray(a).tobytes())
    return hasher.hexdigest()


def evaluate_model(mlp, test: SampleSet) -> EvalReport:
    """Deterministic test-split report. Labels here come from the oracle, so
    oracle-agreement accuracy coincides with binary accuracy by definition."""
    from .neuralnet import predict  # local import: avoids module cycle

    if len(test) == 0:
        raise ValueError("test split is empty")
    predictions = predict(mlp, test.features)
    cm = confusion(predictions, test.labels)
    metrics = f1_accuracy(cm)
    return EvalReport(
        confusion=cm,
        precision=metrics.precision,
        recall=metrics.recall,
        f1=metrics.f1,
        accuracy=metrics.accuracy,
        degenerate=metrics.degenerate,
        class_ratio_open=test.open_fraction(),
        oracle_agreement=metrics.accuracy,
        n_samples=len(test),
        dataset_fingerprint=_sha256_arrays([test.features, test.labels]),
        model_fingerprint=_sha256_arrays(list(mlp.weights) + list(mlp.biases)),
    )


def count_nn_macs(mlp) -> int:
    """Multiply-accumulates per inference: sum over layers of in * out."""
    dims = mlp.layer_dims
    return sum(dims[i] * dims[i + 1] for i in range(len(dims) - 1))


# rough per-rhs-evaluation flop budget of the 2-D coast dynamics
# (exp counted as one op plus the surrounding arithmetic)
RHS_FLOPS = 12


def benchmark(
    mlp,
    model: RocketModel,
    states: Sequence[FlightState],
    h: float,
    repetitions: int = 50,
    warmup: int = 10,
) -> BenchReport:
    """Times NN inference vs full RK4 apogee prediction on identical states
    and records exact op counts. Reports both without asserting a winner:
    which path is cheaper depends on the configuration.
    """
    from .neuralnet import predict  # local import: avoids module cycle

    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    if not states:
        raise ValueError("no states given")
    for s in states:
        if not (s.v_vertical > 0):
            raise ValueError("benchmark states must be ascending")

    steps_total = 0
    evals_total = 0
    for s in states:
        _, steps, evals = predict_apogee_counted(model, s, h, assume_open=False)
        steps_total += steps
        evals_total += evals

    feats = np.array([[s.altitude, s.v_vertical, *s.accel] for s in states])

    def time_pass(fn) -> List[int]:
        for _ in range(warmup):
            fn()
        out = []
        for _ in range(repetitions):
            t0 = time.perf_counter_ns()
            fn()
            out.append(time.perf_counter_ns() - t0)
        return out

    nn_times = time_pass(lambda: predict(mlp, feats))
    rk4_times = time_pass(
        lambda: [predict_apogee(model, s, h, assume_open=False) for s in states]
    )
    nn_med = statistics.median(nn_times)
    rk4_med = statistics.median(rk4_times)
    if nn_med == 0 and rk4_med == 0:
        raise BenchmarkResolutionError("all timing medians are zero")

    def p95(xs: List[int]) -> float:
        return float(np.percentile(xs, 95))

    return BenchReport(
        nn_macs=count_nn_macs(mlp),
        rk4_steps_total=steps_total,
        rk4_rhs_evals=evals_total,
        steps_per_oracle_call=steps_total / len(states),
        rk4_flops_estimate=evals_total * RHS_FLOPS,
        n_states=len(states),
        h=h,
        repetitions=repetitions,
        nn_wall_ns_median=float(nn_med),
        nn_wall_ns_p95=p95(nn_times),
        rk4_wall_ns_median=float(rk4_med),
        rk4_wall_ns_p95=p95(rk4_times),
    )
