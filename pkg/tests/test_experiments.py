import numpy as np
import pytest

from cvarmarket.clearing import Branch, GridParams, table_one_fleet
from cvarmarket.experiments import (
    CASE_I_MEANS,
    CASE_II_STDS,
    CASE_IV_R1,
    HORIZON,
    HourConfig,
    clear_horizon,
    clear_hour,
    run_case_sweep,
    total_cost,
)
from cvarmarket.risk import cvar_alpha, gaussian_cvar
from cvarmarket.scenario import GaussianModel, derive_seed, net_load_transform, sample_hour_scenarios

RAW = table_one_fleet()
LOSSLESS = GridParams(0.0, 0.0)
NONE = GaussianModel(0.0, 0.0)
FAST = {"n_samples": 20_000}


def test_degenerate_hour_is_analytic():
    c = clear_hour(RAW, LOSSLESS, GaussianModel(0.6, 0.0), NONE, 0.9, 1000, seed=1)
    assert c.feasible
    assert c.cvar_s == 0.6 and c.p_total == 0.6
    np.testing.assert_allclose(c.dispatch.outputs, [0.05, 0.1, 0.12, 0.15, 0.18, 0], atol=1e-15)
    assert c.dispatch.branch is Branch.INTERIOR
    assert c.lam == 60
    assert c.shortfall == 0
    assert c.residuals.ok()


def test_over_capacity_hour_is_flagged_not_raised():
    c = clear_hour(RAW, LOSSLESS, GaussianModel(0.9, 0.0), NONE, 0.9, 1000, seed=1)
    assert not c.feasible
    assert c.price is None and c.p_total is None and c.cost is None
    assert not c.assumption_report.a1b_ok
    assert "outside" in c.message


def test_clear_hour_deterministic():
    args = (RAW, GridParams(0.04, 0.05), GaussianModel(0.7, 0.1), GaussianModel(0.5, 0.1), 0.9, 5000)
    assert clear_hour(*args, seed=7) == clear_hour(*args, seed=7)


def test_clear_hour_cost_uses_sample_mean_renewable():
    load, ren = GaussianModel(0.7, 0.1), GaussianModel(0.5, 0.1)
    c = clear_hour(RAW, GridParams(0.04, 0.05), load, ren, 0.9, 5000, seed=3)
    sc = sample_hour_scenarios(load, ren, 5000, seed=3)
    expected = float(RAW.prices @ c.dispatch.outputs) + 10 * sc.p_r.mean()
    assert c.cost == pytest.approx(expected, rel=1e-14)
    assert c.cvar_s == cvar_alpha(net_load_transform(sc, 0.05).values, 0.9)


# --- horizon --------------------------------------------------------------


def _profile():
    hours = np.arange(1, HORIZON + 1)
    load = 0.55 + 0.15 * np.sin((hours - 6) / 24 * 2 * np.pi)
    solar = np.clip(0.4 * np.sin((hours - 6) / 12 * np.pi), 0, None)
    return [HourConfig(GaussianModel(d, 0.05), GaussianModel(r, 0.1 * r)) for d, r in zip(load, solar)]


def test_horizon_identical_degenerate_hours():
    cfg = [HourConfig(GaussianModel(0.5, 0.0), NONE)] * HORIZON
    out = clear_horizon(cfg, RAW, LOSSLESS, 0.9, 100, master_seed=5)
    assert [c.hour for c in out] == list(range(1, 25))
    first = out[0]
    for c in out[1:]:
        assert c.lam == first.lam and c.cvar_s == first.cvar_s
        assert c.dispatch == first.dispatch


def test_horizon_total_cost_is_sum():
    out = clear_horizon(_profile(), RAW, GridParams(0.04, 0.05), 0.9, 5000, master_seed=1)
    assert all(c.feasible for c in out)
    assert total_cost(out) == sum(c.cost for c in out)


def test_horizon_order_and_workers_invariant():
    grid = GridParams(0.04, 0.05)
    cfgs = _profile()
    seq = clear_horizon(cfgs, RAW, grid, 0.9, 5000, master_seed=99)
    par = clear_horizon(cfgs, RAW, grid, 0.9, 5000, master_seed=99, workers=6)
    assert seq == par
    # hours cleared one by one in reverse order reproduce the same results
    for t in reversed(range(1, HORIZON + 1)):
        c = clear_hour(RAW, grid, cfgs[t - 1].load, cfgs[t - 1].renewable, 0.9, 5000, derive_seed(99, t), hour=t)
        assert c == seq[t - 1]


def test_horizon_hours_are_independently_seeded():
    cfg = [HourConfig(GaussianModel(0.5, 0.1), GaussianModel(0.2, 0.1))] * HORIZON
    out = clear_horizon(cfg, RAW, LOSSLESS, 0.9, 2000, master_seed=5)
    assert len({c.cvar_s for c in out}) == HORIZON


def test_horizon_length_checked():
    with pytest.raises(ValueError, match="24"):
        clear_horizon(_profile()[:23], RAW, LOSSLESS, 0.9, 100, master_seed=0)


def test_horizon_infeasible_cost_is_none():
    cfg = [HourConfig(GaussianModel(0.5, 0.0), NONE)] * 23 + [HourConfig(GaussianModel(2.0, 0.0), NONE)]
    out = clear_horizon(cfg, RAW, LOSSLESS, 0.9, 100, master_seed=0)
    assert not out[-1].feasible
    assert total_cost(out) is None


# --- sweeps ---------------------------------------------------------------


def test_case_i_links_are_monotone():
    res = run_case_sweep("I", FAST)
    pts = [p.clearing for p in res.points]
    assert [p.mean for p in res.points] == list(CASE_I_MEANS)
    assert all(c.feasible for c in pts)
    for name in ("cvar_s", "p_total", "lam"):
        vals = [getattr(c, name) for c in pts]
        assert all(b <= a for a, b in zip(vals, vals[1:])), name


def test_case_i_pointwise_crn():
    # same seed, larger mean: every clipped renewable sample moves up and every net load down
    load = GaussianModel(0.7, 0.1)
    prev = None
    for m in CASE_I_MEANS:
        sc = sample_hour_scenarios(load, GaussianModel(m, 0.1), 5000, seed=1)
        s = net_load_transform(sc, 0.05).values
        if prev is not None:
            assert np.all(sc.p_r >= prev[0]) and np.all(s <= prev[1])
            np.testing.assert_array_equal(sc.p_d, prev[2])
        prev = (sc.p_r, s, sc.p_d)


def test_case_iv_cvar_fixed():
    res = run_case_sweep("IV", FAST)
    cv = {p.clearing.cvar_s for p in res.points}
    assert len(cv) == 1
    lams = res.lambdas
    assert all(b > a for a, b in zip(lams, lams[1:]))
    assert [p.r1 for p in res.points] == list(CASE_IV_R1)


def test_case_ii_grid():
    res = run_case_sweep("II", FAST)
    assert [p.std for p in res.points] == list(CASE_II_STDS)
    assert all(p.mean == 0.5 for p in res.points)


def test_case_iii_is_zipped():
    res = run_case_sweep("III", FAST)
    assert [(p.mean, p.std) for p in res.points][4] == (0.45, 0.32)


def test_raw_fleet_case_i_first_point_infeasible():
    assert gaussian_cvar(0.7, 0.1, 0.9) > RAW.capacity
    res = run_case_sweep("I", {"fleet_scale": 1.0, **FAST})
    assert len(res.points) == 10
    assert not res.points[0].clearing.feasible
    assert res.points[0].clearing.lam is None
    assert res.points[-1].clearing.feasible


def test_sweep_reproducible_and_parallel_safe():
    a = run_case_sweep("III", FAST, master_seed=4)
    b = run_case_sweep("III", FAST, master_seed=4, workers=5)
    assert [p.clearing for p in a.points] == [p.clearing for p in b.points]
    assert a.config_echo == b.config_echo
    c = run_case_sweep("III", FAST, master_seed=5)
    assert [p.clearing.cvar_s for p in a.points] != [p.clearing.cvar_s for p in c.points]


def test_config_echo_records_scale():
    echo = run_case_sweep("IV", FAST).config_echo
    assert echo["fleet_scale"] == 1.5 and echo["r1"] == 0.04 and echo["r2"] == 0.05
    assert echo["renewable_price"] == 10.0 and echo["case"] == "IV"
    assert len(echo["grid"]) == 10


def test_custom_sweep():
    res = run_case_sweep("Custom", {"grid": {"mean": [0.1, 0.2, 0.3]}, **FAST})
    assert [(p.mean, p.std, p.r1) for p in res.points] == [(0.1, 0.1, 0.04), (0.2, 0.1, 0.04), (0.3, 0.1, 0.04)]
    with pytest.raises(ValueError):
        run_case_sweep("Custom", {"grid": {"mean": [0.1], "r1": [0.1, 0.2]}, **FAST})
    with pytest.raises(ValueError):
        run_case_sweep("Custom", {"grid": {"bogus": [1]}, **FAST})


def test_unknown_case():
    with pytest.raises(ValueError):
        run_case_sweep("V")
