"""Episode-wise training loops: subjective selection, plain ERM and oracle routing."""

from __future__ import annotations

import csv
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Mapping

import numpy as np

from .data import DomainSet, OpenDataset, TaskKind, sample_dataset
from .nnet import (
    Loss,
    Network,
    SgdConfig,
    backward,
    forward_cache,
    init_network,
    mlp_shapes,
    output_delta,
    per_sample_loss,
    sgd_step_inplace,
    split_batch,
)
from .metrics import global_empirical_error
from .subjective import HypothesisSet, argmin_first

DIVERGENCE_LIMIT = 1e6


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, episode: int, value: float):
        super().__init__(f"loss {value!r} at epoch {epoch}, episode {episode} (limit {DIVERGENCE_LIMIT:g})")
        self.epoch = epoch
        self.episode = episode
        self.value = value


@dataclass(frozen=True)
class TrainConfig:
    K: int = 3
    m: int = 250
    n: int = 2
    epochs: int = 400
    sgd: SgdConfig = field(default_factory=lambda: SgdConfig(0.005, 0.9, 1e-4))
    loss: Loss = Loss.SQUARED
    seed: int = 0
    hidden: int = 32
    layers: int = 5
    shuffle: bool = True
    fresh_episodes: bool = False

    def __post_init__(self):
        for name in ("K", "m", "n", "epochs", "hidden", "layers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        object.__setattr__(self, "loss", Loss(self.loss))
        if isinstance(self.sgd, Mapping):
            object.__setattr__(self, "sgd", SgdConfig(**self.sgd))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["loss"] = self.loss.value
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> TrainConfig:
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown train config keys: {sorted(unknown)}")
        return cls(**d)


def member_seed(seed: int, k: int) -> int:
    return seed * 1000 + k


@dataclass
class EpochRecord:
    epoch: int
    global_error: float
    alloc: list[int]
    domain_alloc: dict[int, list[int]]


@dataclass
class TrainReport:
    """Per-epoch running error and allocation counts.

    ``global_error`` of an epoch averages the selected member's episodic
    loss at selection time, before that episode's update.
    """

    K: int
    epochs: list[EpochRecord] = field(default_factory=list)
    final_global_error: float = float("nan")
    seconds: float = 0.0

    @property
    def final_alloc(self) -> list[int]:
        return self.epochs[-1].alloc

    def csv_header(self) -> list[str]:
        return ["epoch", "global_error"] + [f"alloc_{k}" for k in range(self.K)]

    def csv_rows(self) -> list[list]:
        return [[r.epoch, fmt(r.global_error), *r.alloc] for r in self.epochs]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.csv_header())
            w.writerows(self.csv_rows())

    def summary(self) -> dict:
        last = self.epochs[-1] if self.epochs else None
        return {
            "K": self.K,
            "epochs": len(self.epochs),
            "final_global_error": self.final_global_error,
            "final_alloc": last.alloc if last else [],
            "final_domain_alloc": {str(k): v for k, v in last.domain_alloc.items()} if last else {},
        }


def fmt(v: float) -> str:
    return format(float(v), ".17g")


def episodic_error(h: Network, batch, loss: Loss = Loss.SQUARED) -> float:
    """Mean loss of one network over an episode's samples."""
    X, Y = split_batch(batch)
    out, _, _ = forward_cache(h, X.reshape(len(X), -1))
    return float(per_sample_loss(out, Y, Loss(loss)).mean())


def _network_shapes(ds: DomainSet, cfg: TrainConfig):
    return mlp_shapes(ds.in_dim, cfg.hidden, ds.out_dim, cfg.layers)


def _default_loss(ds: DomainSet, cfg: TrainConfig) -> Loss:
    if ds.kind is TaskKind.CLASSIFICATION and cfg.loss is Loss.SQUARED:
        return Loss.CROSS_ENTROPY
    return cfg.loss


def _train(
    ds: DomainSet,
    cfg: TrainConfig,
    route: Callable[[int], int] | None,
    dataset: OpenDataset | None,
    K: int,
) -> tuple[HypothesisSet, TrainReport]:
    loss = _default_loss(ds, cfg)
    data_rng, order_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(2))
    if dataset is None:
        dataset = sample_dataset(ds, cfg.m, cfg.n, data_rng)
    shapes = _network_shapes(ds, cfg)
    members = [init_network(shapes, member_seed(cfg.seed, k)) for k in range(K)]
    velocity = np.zeros((K, len(members[0].params)))
    domain_ids = [d.id for d in ds.domains]
    report = TrainReport(K)
    start = time.perf_counter()

    for epoch in range(cfg.epochs):
        if cfg.fresh_episodes and epoch > 0:
            dataset = sample_dataset(ds, len(dataset), dataset.n, data_rng)
        m = len(dataset)
        order = order_rng.permutation(m) if cfg.shuffle else range(m)
        total = 0.0
        alloc = [0] * K
        domain_alloc = {d: [0] * K for d in domain_ids}
        for i in order:
            ep = dataset[i]
            X, Y = ep.batch
            if route is None:
                caches = [forward_cache(h, X) for h in members]
                losses = [per_sample_loss(c[0], Y, loss).mean() for c in caches]
                k = argmin_first(losses)
                out, inputs, pre = caches[k]
                chosen_loss = float(losses[k])
            else:
                k = route(ep.domain_id)
                out, inputs, pre = forward_cache(members[k], X)
                chosen_loss = float(per_sample_loss(out, Y, loss).mean())
            value, delta = output_delta(out, Y, loss)
            if not (np.isfinite(value) and value <= DIVERGENCE_LIMIT):
                raise TrainingDiverged(epoch, int(i), value)
            grad = backward(members[k], inputs, pre, delta)
            sgd_step_inplace(members[k].params, grad, cfg.sgd, velocity[k])
            total += chosen_loss
            alloc[k] += 1
            domain_alloc.setdefault(ep.domain_id, [0] * K)[k] += 1
        report.epochs.append(EpochRecord(epoch, total / m, alloc, domain_alloc))

    H = HypothesisSet(members, loss)
    report.seconds = time.perf_counter() - start
    report.final_global_error = global_empirical_error(H, dataset)
    return H, report


def osl_train(
    ds: DomainSet, cfg: TrainConfig, dataset: OpenDataset | None = None
) -> tuple[HypothesisSet, TrainReport]:
    """Train K networks, routing each episode to the member that fits it best.

    Every episode triggers exactly one SGD step, on the selected member only.
    ``dataset`` overrides the episodes drawn from ``ds``; the domain ids it
    carries feed only the report's oracle histogram.
    """
    return _train(ds, cfg, None, dataset, cfg.K)


def vanilla_train(
    ds: DomainSet, cfg: TrainConfig, dataset: OpenDataset | None = None
) -> tuple[Network, TrainReport]:
    """Single-model ERM baseline on the same episode stream."""
    H, report = _train(ds, cfg, lambda _domain: 0, dataset, 1)
    return H[0], report


def oracle_mtl_train(
    ds: DomainSet,
    cfg: TrainConfig,
    oracle: Mapping[int, int] | Callable[[int], int] | None = None,
    dataset: OpenDataset | None = None,
) -> tuple[HypothesisSet, TrainReport]:
    """Multi-task baseline: episodes are routed by their true domain id.

    ``oracle`` maps domain id to member index; the default sends domain i to
    member i.
    """
    if oracle is None:
        oracle = {d.id: i for i, d in enumerate(ds.domains)}
    lookup = oracle.__getitem__ if isinstance(oracle, Mapping) else oracle

    def route(domain_id: int) -> int:
        try:
            k = int(lookup(domain_id))
        except (KeyError, IndexError) as exc:
            raise ValueError(f"oracle has no member for domain {domain_id}") from exc
        if not 0 <= k < cfg.K:
            raise ValueError(f"oracle sent domain {domain_id} to member {k}, outside [0, {cfg.K})")
        return k

    for d in ds.domains:
        route(d.id)
    return _train(ds, cfg, route, dataset, cfg.K)
