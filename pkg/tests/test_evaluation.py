import dataclasses
import math

import numpy as np
import pytest

from bdris.config import ArchSpec, ExperimentConfig, GeometryConfig, dbm_to_watt, load_config
from bdris.evaluation import (aber_from_gains, achievable_rate, mean_and_se, ml_detect,
                              prepare_links, psk_constellation, qfunc, rate_samples,
                              simulate_aber, snr_gain_samples, sweep, theoretical_aber,
                              trial_rng, union_bound_from_gains)
from bdris.metrics import cav, gain_floor_db
from bdris.channel import bs_ris_channel
from bdris.ris_config import Architecture


@pytest.fixture(scope="module")
def small_cfg():
    return dataclasses.replace(ExperimentConfig(), geometry=GeometryConfig(m_x=4, m_y=4),
                               trials=300, aber_trials=200, aber_symbols_per_trial=200)


def test_trial_streams_are_independent_and_stable():
    a = trial_rng(0, 0, 5).standard_normal(3)
    np.testing.assert_array_equal(a, trial_rng(0, 0, 5).standard_normal(3))
    assert not np.allclose(a, trial_rng(0, 1, 5).standard_normal(3))
    assert not np.allclose(a, trial_rng(0, 0, 6).standard_normal(3))


def test_mean_and_se():
    x = np.array([[1.0, 2.0, 3.0, 4.0]])
    mean, se = mean_and_se(x)
    assert mean[0] == 2.5
    assert se[0] == pytest.approx(np.std(x, ddof=1) / 2)
    m1, s1 = mean_and_se(np.array([7.0]))
    assert m1 == 7.0 and s1 == 0.0


@pytest.mark.parametrize("order", [2, 4, 8])
def test_psk_constellation(order):
    c = psk_constellation(order)
    np.testing.assert_allclose(np.abs(c.symbols), 1.0)
    np.testing.assert_array_equal(np.sort(c.labels), np.arange(order))
    # Gray: neighbours differ in one bit
    for k in range(order):
        assert bin(int(c.labels[k] ^ c.labels[(k + 1) % order])).count("1") == 1
    assert c.bits_per_symbol == int(math.log2(order))


def test_psk_rejects_bad_order():
    with pytest.raises(ValueError):
        psk_constellation(6)


def test_ml_detect_noiseless():
    c = psk_constellation(8)
    h = 0.3 * np.exp(0.7j)
    y = 2.0 * h * c.symbols
    np.testing.assert_array_equal(ml_detect(y, h, 4.0, c), np.arange(8))


def test_ml_detect_tie_goes_to_lowest_index():
    c = psk_constellation(2)
    assert ml_detect(np.array([0j]), 1.0, 1.0, c)[0] == 0


def test_ml_detect_matches_scan(rng):
    c = psk_constellation(4)
    y = rng.standard_normal(50) + 1j * rng.standard_normal(50)
    h = 0.8 - 0.2j
    got = ml_detect(y, h, 2.0, c)
    for yi, gi in zip(y, got):
        dist = [abs(yi - math.sqrt(2.0) * h * s) for s in c.symbols]
        assert gi == int(np.argmin(dist))


def test_bpsk_fixed_channel_matches_q_function():
    c = psk_constellation(2)
    noise = 1.0
    h = np.full(400, 0.5 + 0.5j)
    powers = np.array([1.0, 4.0])
    ber, se = aber_from_gains(h, powers, noise, c, 500, seed=1)
    gamma = powers * abs(h[0]) ** 2 / noise
    expected = qfunc(np.sqrt(2 * gamma))
    assert np.all(np.abs(ber[0] - expected) <= 3 * se[0])
    np.testing.assert_allclose(union_bound_from_gains(h, powers, noise, c)[0], expected, rtol=1e-12)


def test_vanishing_noise_gives_no_errors():
    c = psk_constellation(4)
    ber, _ = aber_from_gains(np.full(20, 1.0 + 0j), [1.0], 1e-12, c, 100, seed=0)
    assert ber[0, 0] == 0.0


def test_aber_independent_of_thread_count():
    c = psk_constellation(2)
    h = np.linspace(0.1, 1.0, 30) * np.exp(1j * np.arange(30))
    a, _ = aber_from_gains(h, [1.0, 2.0], 1.0, c, 100, seed=4, threads=1)
    b, _ = aber_from_gains(h, [1.0, 2.0], 1.0, c, 100, seed=4, threads=3)
    np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("order", [2, 4])
def test_union_bound_dominates_simulation(order, small_cfg):
    cfg = dataclasses.replace(small_cfg, modulation_order=order)
    links = prepare_links(cfg, trials=cfg.aber_trials)
    sim = simulate_aber(cfg, links)
    bound = theoretical_aber(cfg, links)
    for label in links.labels:
        s, e, b = sim.column(f"aber_{label}"), sim.column(f"se_{label}"), bound.column(f"bound_{label}")
        assert np.all(s <= b + 3 * e + 1e-12)
        assert np.all(np.diff(s) <= 3 * e[1:] + 1e-12)


def test_links_reproducible_across_threads(small_cfg):
    a = prepare_links(small_cfg, trials=40)
    b = prepare_links(dataclasses.replace(small_cfg, threads=3), trials=40)
    for label in a.labels:
        np.testing.assert_array_equal(a.gains[label], b.gains[label])
    np.testing.assert_array_equal(a.H, b.H)


def test_rate_limits():
    r = rate_samples(np.array([1.0, 2.0]), np.array([0.0, 1e6, 2e6]), 1.0)
    np.testing.assert_array_equal(r[0], 0.0)
    np.testing.assert_allclose(r[2] - r[1], 1.0, atol=1e-6)


def test_rate_ordering_paired(small_cfg):
    specs = (ArchSpec(Architecture.ACTIVE), ArchSpec(Architecture.BD_FULL),
             ArchSpec(Architecture.BD_GROUP, 4), ArchSpec(Architecture.DRIS))
    cfg = dataclasses.replace(small_cfg, architectures=specs)
    links = prepare_links(cfg)
    w = dbm_to_watt([20.0])
    rates = [rate_samples(links.gains[s.label], w, cfg.noise_power_w)[0] for s in specs]
    for hi, lo in zip(rates, rates[1:]):
        mean, se = mean_and_se(hi - lo)
        assert mean >= -3 * se
    table = achievable_rate(cfg, links, powers_dbm=[20.0])
    assert table.column("rate_active")[0] > table.column("rate_dris")[0]


def test_single_path_gain_sits_on_floor():
    cfg = ExperimentConfig()
    gains = snr_gain_samples(cfg, 1, 20)
    floor = gain_floor_db(cav(bs_ris_channel(cfg.build_geometry())).cav)
    np.testing.assert_allclose(gains, floor, atol=1e-9)


def test_sweep_marks_invalid_points(small_cfg):
    table = sweep("group_count", small_cfg, values=(1, 3, 4), trials=20)
    status = list(table.column("status"))
    assert status[0] == "ok" and status[2] == "ok"
    assert status[1].startswith("skipped")
    assert math.isnan(table.rows[1][table.columns.index("rate_bd")])


def test_sweep_rejects_unknown_axis(small_cfg):
    with pytest.raises(ValueError):
        sweep("frequency", small_cfg)


def test_config_driven_links():
    cfg = load_config(text="[geometry]\nm_x = 2\nm_y = 2\n[eval]\ntrials = 10\n")
    links = prepare_links(cfg)
    # 2x2 feed is equal-amplitude, so BD collapses onto D
    np.testing.assert_allclose(np.abs(links.gains["bd"]), np.abs(links.gains["dris"]), rtol=1e-10)
