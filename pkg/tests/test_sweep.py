from __future__ import annotations

import math

import numpy as np
import pytest

from exzone.dynamics import preset, simulate
from exzone.errors import DomainError, InsufficientTail
from exzone.sweep import (
    LimitingProfile,
    Row,
    SimConfig,
    TailStats,
    classify,
    detect_markers,
    limiting_profile,
    simulate_row,
    tail_stats,
)


def _stats(U, V):
    return TailStats(U, U, U, V, V, V)


def test_tail_stats_constant():
    t = np.linspace(0, 100, 401)
    st = tail_stats((t, np.ones_like(t), np.full_like(t, 0.4)))
    assert st.as_tuple() == pytest.approx((1, 1, 1, 0.4, 0.4, 0.4), abs=1e-15)


def test_tail_stats_sinusoid():
    w = 2 * math.pi
    t = np.linspace(0, 400, 40001)
    V = 0.3 + 0.1 * np.sin(w * t)
    st = tail_stats((t, np.ones_like(t), V))
    assert (st.V_hat, st.V_bar, st.V_check) == pytest.approx((0.4, 0.3, 0.2), abs=1e-6)


def test_insufficient_tail():
    t = np.linspace(0, 10, 100)
    with pytest.raises(InsufficientTail):
        tail_stats((t, t, t))
    with pytest.raises(InsufficientTail):
        classify((t, t, t), L=1.0)


def test_classify_bare_series_needs_length():
    t = np.linspace(0, 100, 401)
    with pytest.raises(DomainError):
        classify((t, np.ones_like(t), np.ones_like(t)))


def test_classify_synthetic_cycle_and_extinction():
    t = np.linspace(0, 200, 20001)
    V = 0.3 + 0.1 * np.sin(2 * math.pi * t / 5.0)
    out = classify((t, 0.5 + 0 * t, V), L=1.0)
    assert out.regime == "limit_cycle"
    assert out.period == pytest.approx(5.0, rel=1e-3)
    assert out.n_peaks >= 4
    out = classify((t, 1e-7 * np.exp(-t), 1e-7 * np.exp(-t)), L=1.0)
    assert out.regime == "extinction"
    noisy = 0.3 + 0.1 * np.random.default_rng(0).standard_normal(t.size)
    assert classify((t, 0.5 + 0 * t, noisy), L=1.0).regime == "irregular"


def test_classify_row1_equilibrium():
    p = preset("table1_row1")
    tr = simulate(SimConfig().grid_for(p), p)
    out = classify(tr)
    assert out.regime == "coexistence_equilibrium"
    st = out.stats
    assert st.U_hat - st.U_check <= 1e-6 and st.V_hat - st.V_check <= 1e-6
    assert out.period is None


def test_classify_prey_only():
    p = preset("table1_row1", alpha=1.0, gamma=2.0)
    tr = simulate(SimConfig().grid_for(p), p)
    out = classify(tr)
    assert out.regime == "prey_only"
    assert out.stats.V_bar < 1e-5


def test_markers_on_synthetic_profile():
    p = preset("table1_row1")
    a = np.array([0.1, 0.2, 0.3, 0.4, 0.5])
    cls = ["coexistence_equilibrium"] * 2 + ["limit_cycle"] * 2 + ["extinction"]
    V = [0.1, 0.3, 0.2, 0.1, 0.0]
    rows = [Row(ai, _stats(0.5, v), c, None, 10.0) for ai, c, v in zip(a, cls, V)]
    m = detect_markers(LimitingProfile(a, rows, p, SimConfig()))
    assert m.a_hopf == pytest.approx(0.25)
    assert m.a_ext == pytest.approx(0.45)
    assert m.a_max == pytest.approx(0.2)
    assert m.a_max_cell == pytest.approx((0.1, 0.3))
    rows = [Row(ai, _stats(0.5, 0.1), "coexistence_equilibrium", None, 10.0) for ai in a]
    m = detect_markers(LimitingProfile(a, rows, p, SimConfig()))
    assert m.a_hopf is None and m.a_ext is None


def test_grid_validation():
    p = preset("table1_row1")
    for bad in ([], [0.3, 0.2], [0.0, 0.5], [0.5, 1.0]):
        with pytest.raises(DomainError):
            limiting_profile(p, bad)


def test_single_row_matches_direct_run():
    p = preset("table1_row1")
    cfg = SimConfig()
    prof = limiting_profile(p, [0.4], cfg)
    row, traj = simulate_row(p, cfg)
    assert prof.rows[0] == row
    out = classify(traj)
    assert row.stats == out.stats and row.regime == out.regime


def test_profile_rows_and_worker_independence(tmp_path):
    p = preset("table1_row1")
    cfg = SimConfig(t_end=40.0, n_snapshots=20, n_tail=200)
    a = [0.2, 0.4, 0.6]
    one = limiting_profile(p, a, cfg, jobs=1)
    two = limiting_profile(p, a, cfg, jobs=2)
    assert one.rows == two.rows
    for r in one.rows:
        s = r.stats
        assert s.U_check <= s.U_bar <= s.U_hat and s.V_check <= s.V_bar <= s.V_hat
    one.to_csv(tmp_path / "a.csv")
    two.to_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    header = (tmp_path / "a.csv").read_text().splitlines()[0]
    assert header == "a,U_hat,U_bar,U_check,V_hat,V_bar,V_check,class,period,flags"


def test_failed_rows_are_recorded():
    p = preset("table1_row1")
    # a tail window too short for classification
    cfg = SimConfig(t_end=1.0, n_snapshots=2, n_tail=10)
    prof = limiting_profile(p, [0.3], cfg)
    assert prof.rows[0].regime == "failed"
    assert prof.rows[0].flags[0].startswith("error=InsufficientTail")
