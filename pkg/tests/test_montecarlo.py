import csv
import math

import numpy as np
import pytest

from fdcab.channel import block_rng
from fdcab.config import SystemConfig
from fdcab.montecarlo import (
    CHUNK,
    BlockTrace,
    block_efficiency,
    cycle_rate_tables,
    efficiency_samples,
    ergodic_efficiency,
    measured_losses,
    simulate_cab,
    simulate_hd,
    simulate_traces,
    simulated_breakdown,
    write_traces_csv,
)
from fdcab.optimizer import brute_force_optimum
from fdcab.rates import ar_hd, delta_r_data, delta_r_ini, r_zf_closed_form


@pytest.fixture(scope="module")
def ref_tables():
    # 10^4 blocks, 10 cycles of pilots at M=8, 10 dB, f=alpha=0.1
    return cycle_rate_tables(SystemConfig(), n_cycles=10, trials=10_000)


def test_worker_count_does_not_change_results():
    cfg = SystemConfig(M=4, T=200)
    a = cycle_rate_tables(cfg, 6, trials=3 * CHUNK + 5, workers=1)
    b = cycle_rate_tables(cfg, 6, trials=3 * CHUNK + 5, workers=3)
    for x, y in ((a.genie, b.genie), (a.noini, b.noini), (a.ini, b.ini)):
        np.testing.assert_array_equal(x, y)


def test_more_trials_extend_rather_than_reshuffle():
    cfg = SystemConfig(M=4, T=200)
    small = cycle_rate_tables(cfg, 4, trials=CHUNK)
    big = cycle_rate_tables(cfg, 4, trials=3 * CHUNK)
    np.testing.assert_array_equal(big.noini[:CHUNK], small.noini)


def test_single_block_simulators_are_seeded():
    cfg = SystemConfig()
    a = simulate_cab(cfg, 80, block_rng(1, 2))
    b = simulate_cab(cfg, 80, block_rng(1, 2))
    np.testing.assert_array_equal(a.per_cycle_rates_ini, b.per_cycle_rates_ini)
    assert a.data_rate == b.data_rate


def test_two_cycles_give_one_training_entry():
    tr = simulate_cab(SystemConfig(), 16, block_rng(0))
    assert tr.per_cycle_rates_noini.shape == (1,) and tr.per_cycle_rates_ini.shape == (1,)


def test_hd_training_is_silent():
    tr = simulate_hd(SystemConfig(), 40, block_rng(0))
    assert not tr.per_cycle_rates_noini.any() and not tr.per_cycle_rates_ini.any()
    assert tr.data_rate > 0


@pytest.mark.parametrize("t", [8, 12, 2000])
def test_cab_duration_preconditions(t):
    with pytest.raises(ValueError):
        simulate_cab(SystemConfig(), t, block_rng(0))


def test_hd_accepts_one_cycle_only_for_hd():
    simulate_hd(SystemConfig(), 8, block_rng(0))
    with pytest.raises(ValueError):
        simulate_hd(SystemConfig(), 2000, block_rng(0))


def test_ini_only_hurts(ref_tables):
    assert np.all(ref_tables.noini >= ref_tables.ini)


def test_rates_improve_with_pilots_on_average(ref_tables):
    means = ref_tables.noini[:, 1:].mean(axis=0)
    assert np.all(np.diff(means) > 0)
    assert np.all(np.diff(ref_tables.ini[:, 1:].mean(axis=0)) > 0)


def test_data_loss_bound_direction_at_ten_cycles(ref_tables):
    cfg = SystemConfig()
    loss = ref_tables.genie - ref_tables.noini[:, 10]
    se = loss.std(ddof=1) / math.sqrt(loss.size)
    assert loss.mean() <= float(delta_r_data(10 * cfg.M, cfg)) + 3 * se


@pytest.mark.parametrize("j", [2, 3, 4, 5, 6])
def test_training_loss_bound_direction(ref_tables, j):
    cfg = SystemConfig()
    loss = ref_tables.genie - ref_tables.ini[:, j - 1]
    se = loss.std(ddof=1) / math.sqrt(loss.size)
    assert loss.mean() <= float(delta_r_ini(j - 1, cfg)) + 3 * se


def test_measured_losses_report_paired_statistics():
    pts = measured_losses(SystemConfig(), [1, 3], trials=500)
    assert [p.beta for p in pts] == [1, 3]
    assert all(p.se_ini > 0 and p.ini_ok and p.data_ok for p in pts)
    assert pts[1].loss_ini < pts[0].loss_ini


def test_genie_column_matches_closed_form(ref_tables):
    g = ref_tables.genie
    se = g.std(ddof=1) / math.sqrt(g.size)
    assert abs(g.mean() - r_zf_closed_form(8, 10.0)) <= 3 * se


def test_users_are_symmetric():
    cfg = SystemConfig(M=4, T=200)
    t = cycle_rate_tables(cfg, 5, trials=4000, per_user=True)
    per_user = t.ini[:, 5, :]
    means = per_user.mean(axis=0)
    se = per_user.std(axis=0, ddof=1) / math.sqrt(per_user.shape[0])
    # every pair agrees within 3 SE of the difference
    for i in range(cfg.M):
        for k in range(i + 1, cfg.M):
            assert abs(means[i] - means[k]) <= 3 * math.hypot(se[i], se[k])


def test_trace_and_table_paths_agree():
    cfg = SystemConfig()
    traces = simulate_traces(cfg, 160, "cab", trials=200)
    tables = cycle_rate_tables(cfg, 20, trials=200)
    direct = efficiency_samples(tables, cfg, 160, "cab")
    via_traces = np.array([block_efficiency(tr, cfg, 160) for tr in traces])
    np.testing.assert_allclose(via_traces, direct, rtol=1e-12)
    eff = ergodic_efficiency(traces, cfg, 160)
    assert eff.mean == pytest.approx(direct.mean(), rel=1e-12)


def test_identical_traces_have_zero_error():
    tr = BlockTrace(np.array([0.5, 0.6]), np.array([0.4, 0.5]), 0.9)
    eff = ergodic_efficiency([tr, tr, tr], SystemConfig(), 24)
    assert eff.se == 0.0
    assert eff.mean == pytest.approx((1976 * 0.9 + 1.1 + 7 * 0.9) / 2000)


def test_ergodic_efficiency_needs_two_traces():
    tr = BlockTrace(np.zeros(1), np.zeros(1), 1.0)
    with pytest.raises(ValueError):
        ergodic_efficiency([tr], SystemConfig(), 16)


def test_standard_error_shrinks_like_root_n():
    cfg = SystemConfig()
    se1 = ergodic_efficiency(simulate_traces(cfg, 80, trials=2000), cfg, 80).se
    se2 = ergodic_efficiency(simulate_traces(cfg, 80, trials=4000, seed=cfg.seed + 1), cfg, 80).se
    assert se1 / se2 == pytest.approx(math.sqrt(2), rel=0.2)


def test_hd_traces_match_simulated_objective():
    cfg = SystemConfig(T=400, trials=2000)
    rb = simulated_breakdown(cfg)
    traces = simulate_traces(cfg, 80, "hd", seed=cfg.seed + 7)
    eff = ergodic_efficiency(traces, cfg, 80)
    assert abs(eff.mean - ar_hd(80, cfg, rb)) <= 3 * math.hypot(eff.se, eff.se)


def test_full_duplex_wins_without_ini_paired():
    cfg = SystemConfig(alpha=0.0, f=1.0)
    tables = cycle_rate_tables(cfg, 10, trials=500)
    diff = efficiency_samples(tables, cfg, 80, "cab") - efficiency_samples(tables, cfg, 80, "hd")
    assert np.all(diff >= 0)


def test_sampled_ini_never_worse_on_average():
    cfg = SystemConfig(alpha=1.0)
    det = cycle_rate_tables(cfg, 6, trials=2000)
    smp = cycle_rate_tables(cfg, 6, trials=2000, ini_model="sampled")
    np.testing.assert_array_equal(det.noini, smp.noini)
    # same mean INI power; by convexity the random INI can only raise the average rate
    assert smp.ini[:, 6].mean() >= det.ini[:, 6].mean()
    with pytest.raises(ValueError):
        cycle_rate_tables(cfg, 2, trials=4, ini_model="bogus")


def test_simulated_breakdown_shares_the_skeleton():
    cfg = SystemConfig(T=160, trials=300)
    rb = simulated_breakdown(cfg)
    assert rb.mode == "simulated" and rb.tables.n_blocks == 300
    assert rb.data.shape == (cfg.n_cycles + 1,)
    plan = brute_force_optimum(cfg, "cab", rb)
    assert cfg.M <= plan.t_star_exact < cfg.T


def test_trace_csv(tmp_path):
    cfg = SystemConfig()
    traces = simulate_traces(cfg, 32, trials=3)
    path = tmp_path / "traces.csv"
    write_traces_csv(path, traces)
    rows = list(csv.DictReader(path.open()))
    assert len(rows) == 3 * 3
    assert [int(r["cycle"]) for r in rows[:3]] == [2, 3, 4]
    assert float(rows[4]["rate_ini"]) == traces[1].per_cycle_rates_ini[1]
    assert float(rows[0]["data_rate"]) == traces[0].data_rate


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="simulated optimum ~950 vs analytic 1160: the bound tables are loose at small beta")
def test_simulated_optimum_near_analytic():
    cfg = SystemConfig(trials=256)
    sim = brute_force_optimum(cfg, "cab", simulated_breakdown(cfg, workers=2)).t_star_exact
    ana = brute_force_optimum(cfg, "cab").t_star_exact
    assert abs(sim - ana) <= 2 * cfg.M
