"""Domains, bilevel episode sampling, synthetic suites and mapping-rank analysis."""

from __future__ import annotations

import enum
import json
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Hashable, Iterable, Sequence

import numpy as np


class TaskKind(str, enum.Enum):
    REGRESSION = "regression"
    CLASSIFICATION = "classification"


@dataclass(frozen=True)
class Domain:
    """An input distribution paired with a deterministic labelling function.

    ``sampler(rng, size)`` returns a ``(size, in_dim)`` float array and
    ``target(X)`` maps such an array to ``(size, out_dim)`` floats for
    regression or ``(size,)`` integer labels for classification.
    """

    id: int
    sampler: Callable[[np.random.Generator, int], np.ndarray]
    target: Callable[[np.ndarray], np.ndarray]
    kind: TaskKind = TaskKind.REGRESSION
    name: str = ""
    in_dim: int = 1
    out_dim: int = 1

    def sample(self, rng: np.random.Generator, size: int) -> tuple[np.ndarray, np.ndarray]:
        X = np.asarray(self.sampler(rng, size), dtype=np.float64)
        return X, self.label(X)

    def label(self, X: np.ndarray) -> np.ndarray:
        Y = np.asarray(self.target(X))
        if self.kind is TaskKind.CLASSIFICATION:
            return Y.astype(np.int64).reshape(len(X))
        return Y.astype(np.float64).reshape(len(X), -1)


@dataclass(frozen=True)
class DomainSet:
    domains: tuple[Domain, ...]
    weights: np.ndarray = None

    def __post_init__(self):
        domains = tuple(self.domains)
        if not domains:
            raise ValueError("a domain set needs at least one domain")
        object.__setattr__(self, "domains", domains)
        if self.weights is None:
            w = np.full(len(domains), 1.0 / len(domains))
        else:
            w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (len(domains),) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("domain weights must be a probability vector over the domains")
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return len(self.domains)

    def __getitem__(self, i: int) -> Domain:
        return self.domains[i]

    @property
    def kind(self) -> TaskKind:
        return self.domains[0].kind

    @property
    def in_dim(self) -> int:
        return self.domains[0].in_dim

    @property
    def out_dim(self) -> int:
        return max(d.out_dim for d in self.domains)

    def by_id(self, domain_id: int) -> Domain:
        for d in self.domains:
            if d.id == domain_id:
                return d
        raise KeyError(f"no domain with id {domain_id}")


@dataclass(frozen=True)
class Episode:
    """``n`` labelled samples from one domain.

    ``domain_id`` is oracle-only information: training by subjective
    selection never reads it.
    """

    inputs: np.ndarray
    targets: np.ndarray
    domain_id: int

    def __post_init__(self):
        if len(self.inputs) < 1 or len(self.inputs) != len(self.targets):
            raise ValueError("an episode needs n >= 1 matched inputs and targets")

    @property
    def n(self) -> int:
        return len(self.inputs)

    @property
    def samples(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return list(zip(self.inputs, self.targets))

    @property
    def batch(self) -> tuple[np.ndarray, np.ndarray]:
        return self.inputs, self.targets


@dataclass
class OpenDataset:
    episodes: list[Episode] = field(default_factory=list)

    def __post_init__(self):
        if len({e.n for e in self.episodes}) > 1:
            raise ValueError("all episodes must share the same n")

    def __len__(self) -> int:
        return len(self.episodes)

    def __iter__(self):
        return iter(self.episodes)

    def __getitem__(self, i):
        return self.episodes[i]

    @property
    def m(self) -> int:
        return len(self.episodes)

    @property
    def n(self) -> int:
        return self.episodes[0].n if self.episodes else 0

    @property
    def l(self) -> int:
        return self.m * self.n

    def pairs(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return [p for e in self.episodes for p in e.samples]


def sample_episode(ds: DomainSet, n: int, rng: np.random.Generator) -> Episode:
    if n < 1:
        raise ValueError(f"episode size must be >= 1, got {n}")
    d = int(rng.choice(len(ds), p=ds.weights))
    X, Y = ds[d].sample(rng, n)
    return Episode(X, Y, ds[d].id)


def sample_dataset(ds: DomainSet, m: int, n: int, rng: np.random.Generator) -> OpenDataset:
    if m < 1:
        raise ValueError(f"episode count must be >= 1, got {m}")
    return OpenDataset([sample_episode(ds, n, rng) for _ in range(m)])


# -- synthetic suites -------------------------------------------------------

REGRESSION_RANGE = (-2.0, 2.0)


def _abs_target(X):
    return 2.0 * np.abs(X) - 2.0


def _sin_target(X):
    return 2.0 * np.sin(3.0 * X + np.pi / 2.0)


def _log_target(X):
    return 1.5 * np.log(-X + 2.5) - 1.0


REGRESSION_TARGETS = (_abs_target, _sin_target, _log_target)


def _uniform_inputs(rng, size):
    lo, hi = REGRESSION_RANGE
    return rng.uniform(lo, hi, size=(size, 1))


def regression_suite(weights=None) -> DomainSet:
    """Three conflicting 1-d targets on U[-2, 2]: absolute, sinusoid, logarithm."""
    names = ("abs", "sin", "log")
    return DomainSet(
        tuple(
            Domain(i, _uniform_inputs, f, TaskKind.REGRESSION, name)
            for i, (f, name) in enumerate(zip(REGRESSION_TARGETS, names))
        ),
        weights,
    )


def regression_mean_function(X) -> np.ndarray:
    """Pointwise average of the regression targets; where a single model collapses to."""
    X = np.asarray(X, dtype=np.float64)
    return sum(f(X) for f in REGRESSION_TARGETS) / len(REGRESSION_TARGETS)


def regression_grid(size: int = 200) -> np.ndarray:
    """Centres of ``size`` equal cells tiling the input range.

    Cell centres make the grid mean a midpoint-rule estimate of the
    uniform average, so endpoint values are not over-weighted.
    """
    lo, hi = REGRESSION_RANGE
    return (lo + (hi - lo) * (np.arange(size) + 0.5) / size).reshape(-1, 1)


def encode_shape_color(shape, color, num_shapes: int, num_colors: int) -> np.ndarray:
    shape = np.atleast_1d(shape)
    color = np.atleast_1d(color)
    X = np.zeros((len(shape), num_shapes + num_colors))
    X[np.arange(len(shape)), shape] = 1.0
    X[np.arange(len(color)), num_shapes + color] = 1.0
    return X


def toy_classification_suite(num_shapes: int = 10, num_colors: int = 8, noise: float = 0.05) -> DomainSet:
    """Parallel labelling of (shape, color) one-hot inputs.

    Domain 0 labels by shape, domain 1 by color; the same input can carry
    either label, so datasets drawn from both domains have mapping rank 2.
    """
    if num_shapes < 2 or num_colors < 2:
        raise ValueError("need at least two shapes and two colors")
    if noise < 0:
        raise ValueError("noise must be non-negative")

    def sampler(rng, size):
        shape = rng.integers(num_shapes, size=size)
        color = rng.integers(num_colors, size=size)
        X = encode_shape_color(shape, color, num_shapes, num_colors)
        if noise:
            X = X + rng.normal(0.0, noise, size=X.shape)
        return X

    in_dim = num_shapes + num_colors
    n_classes = max(num_shapes, num_colors)

    def by_shape(X):
        return np.argmax(X[:, :num_shapes], axis=1)

    def by_color(X):
        return np.argmax(X[:, num_shapes:], axis=1)

    return DomainSet(
        (
            Domain(0, sampler, by_shape, TaskKind.CLASSIFICATION, "shape", in_dim, n_classes),
            Domain(1, sampler, by_color, TaskKind.CLASSIFICATION, "color", in_dim, n_classes),
        )
    )


# -- mapping rank -----------------------------------------------------------

def _key(v) -> Hashable:
    """Exact-equality key: numbers compare by their float64 bit pattern."""
    if isinstance(v, (str, bytes)):
        return ("obj", v)
    try:
        arr = np.asarray(v)
    except Exception:  # pragma: no cover - exotic objects
        return ("obj", v)
    if arr.dtype.kind in "biuf":
        return ("num", arr.shape, arr.astype(np.float64).tobytes())
    return ("obj", v if isinstance(v, Hashable) else repr(v))


def conflict_profile(Z: Iterable[tuple]) -> dict:
    """Distinct-output count for every distinct input of ``Z``.

    Keys are the first-seen input objects (converted to tuples for arrays so
    they are hashable).
    """
    outputs: dict = defaultdict(set)
    first_seen: dict = {}
    for x, y in Z:
        k = _key(x)
        first_seen.setdefault(k, x)
        outputs[k].add(_key(y))
    if not outputs:
        raise ValueError("mapping rank is undefined for an empty dataset")
    return {_display(first_seen[k]): len(v) for k, v in outputs.items()}


def _display(x):
    if isinstance(x, np.ndarray):
        return tuple(x.reshape(-1).tolist()) if x.ndim else x.item()
    if isinstance(x, list):
        return tuple(x)
    return x


def mapping_rank(Z: Iterable[tuple]) -> int:
    """Fewest single-valued functions whose graphs jointly cover ``Z``.

    On a finite set this is the largest number of distinct outputs seen at
    any single input: one function per output slot suffices and fewer cannot
    separate the outputs of that input.
    """
    return max(conflict_profile(Z).values())


# -- JSONL episode dumps ----------------------------------------------------

def _as_list(v):
    return np.asarray(v).reshape(-1).tolist()


def episode_to_dict(ep: Episode) -> dict:
    return {
        "domain_id": int(ep.domain_id),
        "samples": [[_as_list(x), _as_list(y)] for x, y in zip(ep.inputs, ep.targets)],
    }


def episode_from_dict(obj: dict, kind: TaskKind | None = None) -> Episode:
    samples = obj["samples"]
    if not samples:
        raise ValueError("episode has no samples")
    X = np.array([s[0] for s in samples], dtype=np.float64)
    Y = np.array([s[1] for s in samples])
    if kind is TaskKind.CLASSIFICATION or (kind is None and Y.dtype.kind in "iu" and Y.shape[1] == 1):
        Y = Y.reshape(-1).astype(np.int64)
    else:
        Y = Y.astype(np.float64)
    return Episode(X, Y, int(obj["domain_id"]))


def write_jsonl(dataset: OpenDataset | Sequence[Episode], path) -> None:
    with open(path, "w") as fh:
        for ep in dataset:
            fh.write(json.dumps(episode_to_dict(ep)) + "\n")


def read_jsonl(path, kind: TaskKind | None = None) -> OpenDataset:
    """Load episodes; malformed lines raise ``ValueError`` naming the line."""
    episodes = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                episodes.append(episode_from_dict(json.loads(line), kind))
            except (ValueError, KeyError, TypeError, IndexError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed episode: {exc}") from exc
    if not episodes:
        raise ValueError(f"{path}: no episodes")
    try:
        return OpenDataset(episodes)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from exc



__all__ = [
    "Domain",
    "DomainSet",
    "Episode",
    "OpenDataset",
    "TaskKind",
    "conflict_profile",
    "mapping_rank",
    "read_jsonl",
    "regression_grid",
    "regression_mean_function",
    "regression_suite",
    "sample_dataset",
    "sample_episode",
    "toy_classification_suite",
    "write_jsonl",
]
