"""Allocation consistency, per-domain accuracy and global errors of a hypothesis set."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .data import Domain, DomainSet, OpenDataset, TaskKind, regression_grid
from .subjective import HypothesisSet, empirical_subjective, expected_subjective_estimate


@dataclass(frozen=True)
class DomainEval:
    domain_id: int
    sub_err: float
    mod_err: float
    n_d: int
    decision_batch_size: int = 1


def sub_err_from_choices(choices, K: int) -> float:
    """One minus the share of the most frequently chosen member."""
    choices = np.asarray(choices, dtype=np.int64)
    if choices.size == 0:
        raise ValueError("no allocations")
    return float(1.0 - np.bincount(choices, minlength=K).max() / choices.size)


def allocations(
    H: HypothesisSet, d: Domain, n_d: int, decision_batch_size: int, rng: np.random.Generator
) -> np.ndarray:
    if n_d < 1 or decision_batch_size < 1:
        raise ValueError("n_d and decision_batch_size must be >= 1")
    X, Y = d.sample(rng, n_d * decision_batch_size)
    b = decision_batch_size
    return np.array(
        [empirical_subjective(H, (X[j * b : (j + 1) * b], Y[j * b : (j + 1) * b])).chosen for j in range(n_d)]
    )


def sub_err(
    H: HypothesisSet, d: Domain, n_d: int, decision_batch_size: int = 1, rng: np.random.Generator | None = None
) -> float:
    """Rate of inconsistent allocations over ``n_d`` decision units drawn from ``d``."""
    rng = np.random.default_rng() if rng is None else rng
    return sub_err_from_choices(allocations(H, d, n_d, decision_batch_size, rng), H.K)


def prediction_error(outputs: np.ndarray, targets: np.ndarray, kind: TaskKind) -> np.ndarray:
    """Squared error for regression, 0/1 error of the argmax for classification."""
    if kind is TaskKind.CLASSIFICATION:
        return (np.argmax(outputs, axis=1) != np.asarray(targets).reshape(-1)).astype(np.float64)
    diff = outputs - np.asarray(targets, dtype=np.float64).reshape(outputs.shape)
    return np.sum(diff * diff, axis=1)


def member_errors(H: HypothesisSet, d: Domain, test_inputs) -> np.ndarray:
    X = np.asarray(test_inputs, dtype=np.float64)
    if len(X) == 0:
        raise ValueError("mod_err needs at least one test input")
    X = X.reshape(len(X), -1)
    Y = d.label(X)
    return np.array([prediction_error(out, Y, d.kind).mean() for out in H.outputs(X)])


def mod_err(H: HypothesisSet, d: Domain, test_inputs) -> float:
    """Best member's mean prediction error on ``d``'s targets at ``test_inputs``."""
    return float(member_errors(H, d, test_inputs).min())


def global_empirical_error(H: HypothesisSet, dataset: OpenDataset) -> float:
    """Mean over episodes of the selected member's episodic loss."""
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    total = 0.0
    for ep in dataset:
        a = empirical_subjective(H, ep.batch)
        total += float(a.episodic_losses[a.chosen])
    return total / len(dataset)


def expected_global_error_estimate(
    H: HypothesisSet, ds: DomainSet, samples_per_domain: int, rng: np.random.Generator
) -> float:
    """Q-weighted loss of each domain's selected member, by Monte Carlo."""
    if samples_per_domain < 1:
        raise ValueError("samples_per_domain must be >= 1")
    total = 0.0
    for w, d in zip(ds.weights, ds.domains):
        a = expected_subjective_estimate(H, d, samples_per_domain, rng)
        total += w * float(a.episodic_losses[a.chosen])
    return total


def default_test_inputs(d: Domain, grid_size: int = 200, seed: int = 0, size: int = 1000) -> np.ndarray:
    """Regression: uniform grid over the input range. Classification: a fixed sample."""
    if d.kind is TaskKind.REGRESSION:
        return regression_grid(grid_size)
    return d.sample(np.random.default_rng(seed), size)[0]


def evaluate(
    H: HypothesisSet,
    ds: DomainSet,
    n_d: int = 300,
    decision_batch_size: int = 2,
    rng: np.random.Generator | None = None,
    grid_size: int = 200,
) -> list[DomainEval]:
    rng = np.random.default_rng(0) if rng is None else rng
    out = []
    for d in ds.domains:
        s = sub_err(H, d, n_d, decision_batch_size, rng)
        e = mod_err(H, d, default_test_inputs(d, grid_size))
        out.append(DomainEval(d.id, s, e, n_d, decision_batch_size))
    return out


EVAL_HEADER = ["domain_id", "sub_err", "mod_err", "n_d"]


def write_eval_csv(rows: list[DomainEval], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(EVAL_HEADER)
        for r in rows:
            w.writerow([r.domain_id, format(r.sub_err, ".17g"), format(r.mod_err, ".17g"), r.n_d])

