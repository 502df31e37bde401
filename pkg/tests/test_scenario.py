import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvarmarket.scenario import (
    GaussianModel,
    NetLoadSamples,
    ScenarioFileError,
    ScenarioSet,
    derive_seed,
    load_scenarios_from_file,
    net_load_transform,
    sample_hour_scenarios,
    write_scenarios_to_file,
)

LOAD = GaussianModel(0.7, 0.1)


def test_zero_variance_renewable_collapses_to_mean():
    s = sample_hour_scenarios(LOAD, GaussianModel(0.0, 0.0), 1000, seed=3)
    assert np.all(s.p_r == 0.0)
    assert np.all(s.p_d >= 0.0)
    assert s.p_d.std() > 0


def test_same_seed_same_samples():
    a = sample_hour_scenarios(LOAD, GaussianModel(0.5, 0.1), 5000, seed=11)
    b = sample_hour_scenarios(LOAD, GaussianModel(0.5, 0.1), 5000, seed=11)
    assert a == b
    assert a.p_d.tobytes() == b.p_d.tobytes()
    c = sample_hour_scenarios(LOAD, GaussianModel(0.5, 0.1), 5000, seed=12)
    assert a != c


def test_sample_means_converge():
    n = 10**6
    s = sample_hour_scenarios(LOAD, GaussianModel(0.5, 0.1), n, seed=42)
    # 3 sigma / sqrt(n) = 3e-4, well inside the 1e-3 contract; clipping mass at 0 is ~1e-12
    assert abs(s.p_d.mean() - 0.7) < 1e-3
    assert abs(s.p_r.mean() - 0.5) < 1e-3
    assert abs(s.p_d.mean() - 0.7) < 3 * 0.1 / np.sqrt(n) * 1.5


def test_clipped_sample_formula():
    from cvarmarket.scenario import standard_draws

    z_d, z_r = standard_draws(200, 5)
    s = sample_hour_scenarios(GaussianModel(0.1, 0.3), GaussianModel(0.0, 0.2), 200, seed=5)
    np.testing.assert_array_equal(s.p_d, np.maximum(0.0, 0.1 + 0.3 * z_d))
    np.testing.assert_array_equal(s.p_r, np.maximum(0.0, 0.0 + 0.2 * z_r))


@settings(max_examples=50, deadline=None)
@given(
    mean=st.floats(-2, 2),
    std=st.floats(0, 3),
    seed=st.integers(0, 2**32 - 1),
)
def test_clipping_never_negative(mean, std, seed):
    s = sample_hour_scenarios(GaussianModel(mean, std), GaussianModel(mean, std), 500, seed)
    assert s.p_d.min() >= 0 and s.p_r.min() >= 0
    assert s.n_samples == len(s.pairs) == 500


def test_unclipped_model_keeps_negatives():
    s = sample_hour_scenarios(GaussianModel(0.0, 1.0, clip_at_zero=False), LOAD, 1000, seed=0)
    assert s.p_d.min() < 0


@pytest.mark.parametrize("n", [0, -3])
def test_bad_sample_count(n):
    with pytest.raises(ValueError):
        sample_hour_scenarios(LOAD, LOAD, n, seed=0)


def test_negative_std_rejected():
    with pytest.raises(ValueError):
        GaussianModel(0.5, -0.1)


def test_scenario_set_is_readonly():
    s = ScenarioSet([0.7, 0.8], [0.5, 0.4])
    with pytest.raises(ValueError):
        s.p_d[0] = 1.0


def test_derive_seed_is_stable_and_distinct():
    assert derive_seed(1, 2) == derive_seed(1, 2)
    seeds = {derive_seed(20240601, t) for t in range(1, 25)}
    assert len(seeds) == 24


# --- file ingestion -------------------------------------------------------


def test_load_two_rows_in_order(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("p_d,p_r\n0.7,0.5\n0.8,0.4\n")
    s = load_scenarios_from_file(path)
    assert s.pairs == [(0.7, 0.5), (0.8, 0.4)]
    assert s.n_samples == 2


@pytest.mark.parametrize(
    "body, row",
    [
        ("0.7,0.5\n-0.1,0.2\n", 3),
        ("0.7,0.5\n0.3,-0.1\n", 3),
        ("0.7,abc\n", 2),
        ("0.7,0.5,0.1\n", 2),
    ],
)
def test_bad_rows_name_the_row(tmp_path, body, row):
    path = tmp_path / "s.csv"
    path.write_text("p_d,p_r\n" + body)
    with pytest.raises(ScenarioFileError, match=f"row {row}"):
        load_scenarios_from_file(path)


@pytest.mark.parametrize("body", ["", "p_d,p_r\n", "x,y\n1,2\n"])
def test_empty_or_headerless_file(tmp_path, body):
    path = tmp_path / "s.csv"
    path.write_text(body)
    with pytest.raises(ScenarioFileError):
        load_scenarios_from_file(path)


def test_missing_file(tmp_path):
    with pytest.raises(ScenarioFileError, match="no such"):
        load_scenarios_from_file(tmp_path / "nope.csv")


def test_round_trip_large(tmp_path):
    s = sample_hour_scenarios(LOAD, GaussianModel(0.5, 0.2), 10**5, seed=9)
    path = tmp_path / "big.csv"
    write_scenarios_to_file(s, path)
    back = load_scenarios_from_file(path)
    assert back.n_samples == 10**5
    np.testing.assert_array_equal(back.p_d, s.p_d)
    np.testing.assert_array_equal(back.p_r, s.p_r)


# --- net-load transform ---------------------------------------------------


def test_transform_arithmetic():
    s = net_load_transform(ScenarioSet([0.7], [0.5]), r2=0.1)
    assert s.values[0] == pytest.approx(0.225, abs=1e-15)


def test_transform_reductions():
    sc = ScenarioSet([0.7, 0.3, 0.9], [0.0, 0.2, 0.6])
    s0 = net_load_transform(sc, 0.0)
    np.testing.assert_array_equal(s0.values, sc.p_d - sc.p_r)
    s1 = net_load_transform(ScenarioSet([0.7, 0.3], [0.0, 0.0]), 0.3)
    np.testing.assert_array_equal(s1.values, [0.7, 0.3])


def test_transform_exact_recompute():
    sc = sample_hour_scenarios(LOAD, GaussianModel(0.5, 0.3), 2000, seed=1)
    s = net_load_transform(sc, 0.05)
    assert isinstance(s, NetLoadSamples) and len(s) == len(sc)
    recomputed = [d + 0.05 * r**2 - r for d, r in sc.pairs]
    assert s.values.tolist() == recomputed


def test_transform_rejects_negative_r2():
    with pytest.raises(ValueError):
        net_load_transform(ScenarioSet([0.7], [0.5]), -0.01)


@settings(max_examples=50, deadline=None)
@given(p_d=st.floats(0, 2), r2=st.floats(0, 1))
def test_transform_decreasing_in_renewable(p_d, r2):
    limit = 1 / (2 * r2) if r2 > 0 else 5.0
    p_r = np.linspace(0, min(limit, 5.0), 50, endpoint=r2 == 0)
    s = net_load_transform(ScenarioSet(np.full(p_r.size, p_d), p_r), r2).values
    assert np.all(np.diff(s) < 0)
