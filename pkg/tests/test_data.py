import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orlkit.data import (EPS_NORM, DatasetFormatError, DatasetTruncatedError,
                         DatasetVersionError, Manifest, OfflineDataset,
                         SourceInfo, compute_norm_stats, denormalize_state,
                         export_csv, import_csv, load_dataset, mix_datasets,
                         normalize_state, sample_minibatch, save_dataset,
                         subset_dataset)
from orlkit.nets import make_rng


def toy_dataset(n=8, obs=2, act=1, seed=0, env="twinpeaks1d", policy="expert"):
    rng = make_rng(seed)
    return OfflineDataset(
        states=rng.normal(size=(n, obs)),
        actions=rng.uniform(-1, 1, size=(n, act)),
        rewards=rng.normal(size=n),
        next_states=rng.normal(size=(n, obs)),
        terminals=rng.random(n) < 0.5,
        manifest=Manifest(env=env, sources=[SourceInfo(policy, n, seed)],
                          seed=seed),
    )


def test_norm_stats_two_point_example():
    # states {1} and next_states {3}: pooled population mean 2, std 1
    ds = OfflineDataset(
        states=[[1.0]], actions=[[0.0]], rewards=[0.0],
        next_states=[[3.0]], terminals=[True],
        manifest=Manifest("twinpeaks1d", [SourceInfo("expert", 1, 0)], 0),
    )
    stats = compute_norm_stats(ds)
    assert stats.mean == pytest.approx([2.0])
    assert stats.std == pytest.approx([1.0])


def test_norm_stats_constant_states_floored():
    ds = OfflineDataset(
        states=np.full((5, 1), 4.0), actions=np.zeros((5, 1)),
        rewards=np.zeros(5), next_states=np.full((5, 1), 4.0),
        terminals=np.zeros(5, bool),
        manifest=Manifest("twinpeaks1d", [SourceInfo("expert", 5, 0)], 0),
    )
    assert compute_norm_stats(ds).std == pytest.approx([EPS_NORM])


def test_union_stats_equal_concatenation_stats():
    a, b = toy_dataset(n=20, seed=1), toy_dataset(n=11, seed=2)
    mixed = mix_datasets(a, b)
    # oracle: statistics recomputed on an explicitly concatenated pool
    pool = np.concatenate([a.states, a.next_states, b.states, b.next_states])
    assert mixed.stats.mean == pytest.approx(pool.mean(axis=0))
    assert mixed.stats.std == pytest.approx(
        np.maximum(pool.std(axis=0), EPS_NORM))


def test_normalize_state_examples_and_round_trip():
    ds = toy_dataset(n=16, seed=3)
    stats = ds.stats
    assert normalize_state(stats, stats.mean) == pytest.approx(np.zeros(2))
    rng = make_rng(4)
    s = rng.normal(size=(7, 2))
    back = denormalize_state(stats, normalize_state(stats, s))
    assert np.max(np.abs(back - s)) < 1e-12
    with pytest.raises(ValueError):
        normalize_state(stats, np.zeros(3))


def test_normalize_one_dim_example():
    from orlkit.data import NormStats
    stats = NormStats(mean=np.array([2.0]), std=np.array([1.0]))
    assert normalize_state(stats, [3.0]) == pytest.approx([1.0])


def test_mix_sizes_and_manifest_counts():
    a, b = toy_dataset(n=100, seed=5), toy_dataset(n=50, seed=6, policy="random")
    mixed = mix_datasets(a, b)
    assert len(mixed) == 150
    assert [s.count for s in mixed.manifest.sources] == [100, 50]
    assert [s.policy for s in mixed.manifest.sources] == ["expert", "random"]


def test_mix_rejects_mismatched_env_or_dims():
    a = toy_dataset(n=4, env="twinpeaks1d")
    b = toy_dataset(n=4, env="pointmass2d", seed=9)
    with pytest.raises(ValueError):
        mix_datasets(a, b)
    c = toy_dataset(n=4, obs=3, seed=10)
    with pytest.raises(ValueError):
        mix_datasets(a, c)


def test_mix_commutative_up_to_order():
    a, b = toy_dataset(n=6, seed=1), toy_dataset(n=9, seed=2, policy="random")
    ab, ba = mix_datasets(a, b), mix_datasets(b, a)
    assert len(ab) == len(ba)
    assert sorted(s.policy for s in ab.manifest.sources) == sorted(
        s.policy for s in ba.manifest.sources)
    assert np.allclose(ab.stats.mean, ba.stats.mean)
    assert np.allclose(sorted(ab.rewards), sorted(ba.rewards))


def test_sample_minibatch_degenerate_single_row():
    ds = toy_dataset(n=1)
    batch = sample_minibatch(ds, 3, make_rng(0))
    assert np.all(batch.indices == 0)
    assert np.array_equal(batch.neg_action_1, np.repeat(ds.actions, 3, 0))
    assert np.array_equal(batch.neg_action_2, np.repeat(ds.actions, 3, 0))


def test_sample_minibatch_same_seed_identical():
    ds = toy_dataset(n=32)
    b1 = sample_minibatch(ds, 16, make_rng(42))
    b2 = sample_minibatch(ds, 16, make_rng(42))
    assert np.array_equal(b1.indices, b2.indices)
    assert np.array_equal(b1.neg_action_1, b2.neg_action_1)
    assert np.array_equal(b1.neg_action_2, b2.neg_action_2)


def test_sample_minibatch_rejects_bad_size():
    with pytest.raises(ValueError):
        sample_minibatch(toy_dataset(), 0, make_rng(0))


def index_frequencies_within_3_sigma(counts, draws, rows):
    p = 1.0 / rows
    sigma = np.sqrt(draws * p * (1 - p))
    return np.all(np.abs(counts - draws * p) <= 3 * sigma)


def test_minibatch_index_frequency_uniform():
    ds = toy_dataset(n=10, seed=8)
    batch = sample_minibatch(ds, 100_000, make_rng(17), negatives=False)
    counts = np.bincount(batch.indices, minlength=10)
    assert index_frequencies_within_3_sigma(counts, 100_000, 10)


def test_negative_actions_marginally_uniform():
    ds = toy_dataset(n=10, seed=8)
    batch = sample_minibatch(ds, 100_000, make_rng(23))
    # map sampled negative actions back to their row ids
    for negs in (batch.neg_action_1, batch.neg_action_2):
        ids = np.argmin(np.abs(negs - ds.actions[:, 0][None, :]), axis=1)
        counts = np.bincount(ids, minlength=10)
        assert index_frequencies_within_3_sigma(counts, 100_000, 10)


def test_save_load_round_trip_bit_exact(tmp_path):
    ds = toy_dataset(n=100, seed=13)
    path = tmp_path / "d.orld"
    save_dataset(ds, path)
    assert load_dataset(path) == ds


def test_load_errors_are_distinct(tmp_path):
    ds = toy_dataset(n=10, seed=14)
    path = tmp_path / "d.orld"
    save_dataset(ds, path)
    blob = path.read_bytes()

    bad = tmp_path / "bad.orld"
    bad.write_bytes(b"NOPE" + blob[4:])
    (tmp_path / "bad.orld.manifest.json").write_text("{}")
    with pytest.raises(DatasetFormatError):
        load_dataset(bad)

    ver = tmp_path / "ver.orld"
    blob2 = bytearray(blob)
    blob2[4] = 99  # version field
    ver.write_bytes(bytes(blob2))
    (tmp_path / "ver.orld.manifest.json").write_text("{}")
    with pytest.raises(DatasetVersionError):
        load_dataset(ver)

    cut = tmp_path / "cut.orld"
    cut.write_bytes(blob[:-8])
    (tmp_path / "cut.orld.manifest.json").write_text("{}")
    with pytest.raises(DatasetTruncatedError):
        load_dataset(cut)


def test_csv_import_matches_binary(tmp_path):
    ds = toy_dataset(n=25, seed=15)
    bpath, cpath = tmp_path / "d.orld", tmp_path / "d.csv"
    save_dataset(ds, bpath)
    export_csv(ds, cpath)
    from_bin = load_dataset(bpath)
    from_csv = import_csv(cpath, env=ds.manifest.env, policy="expert", seed=15)
    assert np.array_equal(from_csv.states, from_bin.states)
    assert np.array_equal(from_csv.actions, from_bin.actions)
    assert np.array_equal(from_csv.rewards, from_bin.rewards)
    assert np.array_equal(from_csv.next_states, from_bin.next_states)
    assert np.array_equal(from_csv.terminals, from_bin.terminals)


def test_csv_import_rejects_wrong_header(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(DatasetFormatError):
        import_csv(path, env="twinpeaks1d")


def test_dataset_validates_inputs():
    man = Manifest("twinpeaks1d", [SourceInfo("expert", 2, 0)], 0)
    with pytest.raises(ValueError):
        OfflineDataset([[0.0]], [[2.0]], [0.0], [[0.0]], [False],
                       Manifest("twinpeaks1d", [SourceInfo("e", 1, 0)], 0))
    with pytest.raises(ValueError):  # manifest count mismatch
        OfflineDataset([[0.0]], [[0.0]], [0.0], [[0.0]], [False], man)
    with pytest.raises(ValueError):  # non-finite
        OfflineDataset([[np.nan]], [[0.0]], [0.0], [[0.0]], [False],
                       Manifest("twinpeaks1d", [SourceInfo("e", 1, 0)], 0))


def test_subset_dataset_relabels_source():
    ds = toy_dataset(n=10, seed=16)
    sub = subset_dataset(ds, [1, 3, 5], policy="sliced")
    assert len(sub) == 3
    assert sub.manifest.sources[0].policy == "sliced"
    assert np.array_equal(sub.states, ds.states[[1, 3, 5]])


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=1, max_value=30), st.integers(0, 10_000))
def test_round_trip_property(tmp_path_factory, n, seed):
    ds = toy_dataset(n=n, seed=seed)
    path = tmp_path_factory.mktemp("rt") / "d.orld"
    save_dataset(ds, path)
    assert load_dataset(path) == ds
