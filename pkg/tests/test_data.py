import math
from itertools import combinations, product

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from openended.data import (
    Domain,
    DomainSet,
    Episode,
    OpenDataset,
    TaskKind,
    conflict_profile,
    encode_shape_color,
    mapping_rank,
    read_jsonl,
    regression_grid,
    regression_mean_function,
    regression_suite,
    sample_dataset,
    sample_episode,
    toy_classification_suite,
    write_jsonl,
)

from oracles import brute_force_rank


def line_domain(i=0, slope=1.0):
    return Domain(i, lambda rng, size: rng.uniform(-1, 1, size=(size, 1)), lambda X: slope * X, TaskKind.REGRESSION)


def test_single_domain_episode():
    ds = DomainSet((line_domain(4),))
    ep = sample_episode(ds, 3, np.random.default_rng(0))
    assert ep.domain_id == 4 and ep.n == 3


def test_episode_is_deterministic():
    ds = regression_suite()
    a = sample_episode(ds, 5, np.random.default_rng(9))
    b = sample_episode(ds, 5, np.random.default_rng(9))
    assert a.domain_id == b.domain_id
    assert np.array_equal(a.inputs, b.inputs) and np.array_equal(a.targets, b.targets)


def test_uniform_domain_frequencies():
    rng = np.random.default_rng(5)
    ds = regression_suite()
    counts = np.bincount([sample_episode(ds, 1, rng).domain_id for _ in range(30000)], minlength=3)
    freq = counts / 30000
    assert np.all((freq >= 0.30) & (freq <= 0.37)), freq


def test_weighted_domain_frequencies():
    rng = np.random.default_rng(2)
    ds = regression_suite(weights=(0.7, 0.2, 0.1))
    freq = np.bincount([sample_episode(ds, 1, rng).domain_id for _ in range(20000)], minlength=3) / 20000
    assert freq == pytest.approx([0.7, 0.2, 0.1], abs=0.02)


@pytest.mark.parametrize("n", [0, -1])
def test_episode_size_must_be_positive(n):
    with pytest.raises(ValueError):
        sample_episode(regression_suite(), n, np.random.default_rng(0))


def test_weights_validated():
    with pytest.raises(ValueError):
        regression_suite(weights=(0.5, 0.5, 0.1))
    with pytest.raises(ValueError):
        DomainSet(())


@pytest.mark.parametrize(
    "domain, x, expected",
    [
        (0, 2.0, 2.0),
        (1, 0.0, 2.0),
        (2, 0.0, 1.5 * math.log(2.5) - 1.0),
    ],
)
def test_regression_targets(domain, x, expected):
    assert regression_suite()[domain].label(np.array([[x]]))[0, 0] == pytest.approx(expected, abs=1e-12)


def test_log_target_reference_value():
    assert regression_suite()[2].label(np.array([[0.0]]))[0, 0] == pytest.approx(0.37444, abs=5e-6)


def test_regression_inputs_in_range():
    X, Y = regression_suite()[1].sample(np.random.default_rng(0), 500)
    assert X.shape == (500, 1) and Y.shape == (500, 1)
    assert X.min() >= -2 and X.max() <= 2


def test_mean_function_at_zero():
    assert regression_mean_function(np.array([[0.0]]))[0, 0] == pytest.approx((-2 + 2 + 0.37444) / 3, abs=1e-5)
    assert regression_grid().shape == (200, 1)


def test_intra_episode_purity():
    ds = regression_suite()
    data = sample_dataset(ds, 60, 4, np.random.default_rng(1))
    for ep in data:
        assert np.array_equal(ds.by_id(ep.domain_id).label(ep.inputs), ep.targets)


def test_toy_labels():
    ds = toy_classification_suite(num_shapes=5, num_colors=4, noise=0.0)
    x = encode_shape_color(3, 1, 5, 4)
    assert ds[0].label(x)[0] == 3
    assert ds[1].label(x)[0] == 1
    assert ds.in_dim == 9 and ds.out_dim == 5 and ds.kind is TaskKind.CLASSIFICATION


@pytest.mark.parametrize("shapes, colors", [(1, 4), (4, 1)])
def test_toy_rejects_degenerate_sizes(shapes, colors):
    with pytest.raises(ValueError):
        toy_classification_suite(shapes, colors)


def test_toy_noise_free_dataset_has_rank_two():
    ds = toy_classification_suite(4, 4, noise=0.0)
    data = sample_dataset(ds, 200, 2, np.random.default_rng(0))
    assert mapping_rank(data.pairs()) == 2


@pytest.mark.parametrize(
    "Z, rank",
    [
        ([(0, 0), (1, 1), (2, 4)], 1),
        ([(0, 0), (0, 1), (1, 5)], 2),
        ([(0, "a"), (0, "b"), (0, "c"), (1, "a")], 3),
        ([(0, 1), (0, 1)], 1),
    ],
)
def test_mapping_rank_examples(Z, rank):
    assert mapping_rank(Z) == rank
    assert brute_force_rank(Z) == rank


def test_conflict_profile_examples():
    assert conflict_profile([(0, 0), (1, 1)]) == {0: 1, 1: 1}
    assert conflict_profile([(0, 0), (0, 1)]) == {0: 2}


def test_rank_of_empty_rejected():
    with pytest.raises(ValueError):
        mapping_rank([])
    with pytest.raises(ValueError):
        conflict_profile([])


def test_rank_uses_exact_equality():
    assert mapping_rank([(0.1 + 0.2, 0), (0.3, 1)]) == 1
    assert mapping_rank([(np.array([1.0, 2.0]), 0), (np.array([1.0, 2.0]), 1)]) == 2
    assert mapping_rank([(1, 0), (1.0, 1)]) == 2


def test_rank_matches_brute_force_exhaustively():
    # every set of distinct pairs with at most 8 elements over 3-symbol alphabets
    universe = list(product(range(3), repeat=2))
    mismatches = 0
    for size in range(1, 9):
        for Z in combinations(universe, size):
            mismatches += mapping_rank(Z) != brute_force_rank(Z)
    assert mismatches == 0


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 2), st.sampled_from("abc")), min_size=1, max_size=7))
def test_rank_matches_brute_force_on_multisets(Z):
    assert mapping_rank(Z) == brute_force_rank(Z)
    assert max(conflict_profile(Z).values()) == mapping_rank(Z)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_rank_never_exceeds_domain_count(seed, n_domains):
    ds = toy_classification_suite(3, 3, noise=0.0)
    if n_domains == 1:
        ds = DomainSet(ds.domains[:1])
    elif n_domains == 3:
        extra = Domain(2, ds[0].sampler, lambda X: np.zeros(len(X), dtype=np.int64), TaskKind.CLASSIFICATION, "zero", 6, 3)
        ds = DomainSet(ds.domains + (extra,))
    data = sample_dataset(ds, 40, 3, np.random.default_rng(seed))
    rank = mapping_rank(data.pairs())
    assert rank <= n_domains
    if n_domains == 1:
        assert rank == 1


def test_dataset_shape_invariants():
    data = sample_dataset(regression_suite(), 7, 3, np.random.default_rng(0))
    assert (data.m, data.n, data.l) == (7, 3, 21)
    with pytest.raises(ValueError):
        OpenDataset([data[0], Episode(np.zeros((2, 1)), np.zeros((2, 1)), 0)])


@pytest.mark.parametrize("suite", ["regression", "toy"])
def test_jsonl_round_trip(tmp_path, suite):
    ds = regression_suite() if suite == "regression" else toy_classification_suite(4, 3)
    data = sample_dataset(ds, 12, 2, np.random.default_rng(3))
    path = tmp_path / "d.jsonl"
    write_jsonl(data, path)
    back = read_jsonl(path)
    assert back.m == 12 and back.n == 2
    for a, b in zip(data, back):
        assert a.domain_id == b.domain_id
        assert np.array_equal(a.inputs, b.inputs)
        assert np.array_equal(a.targets, b.targets) and a.targets.dtype == b.targets.dtype


def test_jsonl_error_names_line(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"domain_id": 0, "samples": [[[0], [1]]]}\n{"domain_id": 0}\n')
    with pytest.raises(ValueError, match=r"bad\.jsonl:2"):
        read_jsonl(path)
