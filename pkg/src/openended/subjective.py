"""Hard-EM hypothesis selection over a set of networks."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Domain
from .nnet import Loss, Network, forward, network_from_dict, network_to_dict, per_sample_loss, split_batch


@dataclass
class HypothesisSet:
    members: list[Network]
    loss: Loss = Loss.SQUARED
    prior: np.ndarray = None

    def __post_init__(self):
        self.members = list(self.members)
        if not self.members:
            raise ValueError("a hypothesis set needs K >= 1 members")
        self.loss = Loss(self.loss)
        K = len(self.members)
        prior = np.full(K, 1.0 / K) if self.prior is None else np.asarray(self.prior, dtype=np.float64)
        if prior.shape != (K,) or np.any(prior <= 0) or abs(prior.sum() - 1.0) > 1e-12:
            raise ValueError("prior must be a strictly positive probability vector over members")
        self.prior = prior

    @property
    def K(self) -> int:
        return len(self.members)

    def __len__(self) -> int:
        return len(self.members)

    def __getitem__(self, k: int) -> Network:
        return self.members[k]

    def outputs(self, X) -> list[np.ndarray]:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(-1, self.members[0].in_dim)
        return [forward(h, X) for h in self.members]

    def episodic_losses(self, batch) -> np.ndarray:
        """Mean batch loss of every member, shape ``(K,)``."""
        X, Y = split_batch(batch)
        return np.array([per_sample_loss(out, Y, self.loss).mean() for out in self.outputs(X)])

    def copy(self) -> HypothesisSet:
        return HypothesisSet([h.copy() for h in self.members], self.loss, self.prior.copy())


@dataclass(frozen=True)
class Allocation:
    chosen: int
    episodic_losses: np.ndarray = field(repr=False)
    episode_index: int = -1


def argmin_first(values) -> int:
    """Index of the smallest value; exact ties go to the lowest index."""
    return int(np.argmin(np.asarray(values)))


def empirical_subjective(H: HypothesisSet, batch, episode_index: int = -1) -> Allocation:
    """Pick the member with the smallest mean loss on ``batch``."""
    losses = H.episodic_losses(batch)
    return Allocation(argmin_first(losses), losses, episode_index)


def expected_subjective_estimate(
    H: HypothesisSet, d: Domain, n_eval: int, rng: np.random.Generator
) -> Allocation:
    """Monte-Carlo stand-in for the infinite-sample selector on one domain."""
    if n_eval < 1:
        raise ValueError(f"n_eval must be >= 1, got {n_eval}")
    return empirical_subjective(H, d.sample(rng, n_eval))


def gaussian_posterior_argmax(H: HypothesisSet, x, y, eps: float = 1.0) -> int:
    """Most likely member when each predicts the mean of an isotropic Gaussian."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    log_lik = [
        -np.sum((y - out.reshape(-1)) ** 2) / (2.0 * eps**2)
        for out in H.outputs(np.asarray(x, dtype=np.float64).reshape(1, -1))
    ]
    return int(np.argmax(log_lik))


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    ez = np.exp(z)
    return ez / ez.sum(axis=-1, keepdims=True)


def categorical_argmax(probs, y) -> int:
    """Member maximising ``prod_j p_kj ** y_j`` for a one-hot (or integer) label.

    ``probs`` is a ``(K, L)`` array of per-member class probabilities.
    """
    probs = np.asarray(probs, dtype=np.float64)
    if np.any(np.abs(probs.sum(axis=1) - 1.0) > 1e-9):
        raise ValueError("member class probabilities must sum to 1")
    onehot = np.asarray(y)
    if onehot.ndim == 0:
        label = int(onehot)
        onehot = np.zeros(probs.shape[1])
        onehot[label] = 1.0
    likelihood = np.prod(probs ** onehot[None, :], axis=1)
    return int(np.argmax(likelihood))


def categorical_posterior_argmax(H: HypothesisSet, x, y) -> int:
    logits = np.stack([out[0] for out in H.outputs(np.asarray(x, dtype=np.float64).reshape(1, -1))])
    return categorical_argmax(softmax(logits), y)


def hypothesis_set_to_dict(H: HypothesisSet) -> dict:
    return {
        "loss": H.loss.value,
        "prior": [float(p) for p in H.prior],
        "members": [network_to_dict(h) for h in H.members],
    }


def hypothesis_set_from_dict(obj: dict) -> HypothesisSet:
    try:
        members = [network_from_dict(m) for m in obj["members"]]
        return HypothesisSet(members, Loss(obj["loss"]), obj.get("prior"))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed hypothesis-set checkpoint: {exc}") from exc


def save_hypothesis_set(H: HypothesisSet, path) -> None:
    Path(path).write_text(json.dumps(hypothesis_set_to_dict(H)))


def load_hypothesis_set(path) -> HypothesisSet:
    return hypothesis_set_from_dict(json.loads(Path(path).read_text()))
