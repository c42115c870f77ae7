import warnings

import numpy as np
import pytest

from gfk.config import dothan_defaults, expvasicek_defaults
from gfk.experiments import (
    classical_check,
    run_epsilon_sweep,
    run_table1,
    run_table2,
    run_trajectories,
    solve_pde,
)

# coarse-grid overrides keep these integration tests quick
FAST_DOTHAN = ["pde.dx=0.15", "pde.store_levels=101", "gheat.a_points=81",
               "gheat.dx_scale=0.05", "mc.n_paths=400", "mc.chunk=150",
               "mc.dump_paths=3"]
FAST_EXPVAS = ["pde.dx=0.02", "pde.store_levels=101", "gheat.a_points=81",
               "gheat.dx_scale=0.05"]


@pytest.fixture(scope="module")
def dothan_cfg():
    return dothan_defaults().apply_overrides(FAST_DOTHAN)


@pytest.fixture(scope="module")
def expvas_cfg():
    return expvasicek_defaults().apply_overrides(FAST_EXPVAS)


def test_table1_shape_and_bounds(dothan_cfg):
    table = run_table1(dothan_cfg)
    assert table.values.shape == (3, 3)
    # maximum principle pass-through: every cell below the terminal bound
    assert np.all(np.abs(table.values) <= table.cell_m0 + 1e-9)
    assert np.all(table.cell_max_abs <= table.cell_m0 + 1e-9)
    # more uncertainty (smaller sigma_lo) never decreases the sup value
    assert np.all(np.diff(table.values, axis=0) <= 1e-12)


def test_table1_rejects_wrong_model(expvas_cfg):
    with pytest.raises(ValueError):
        run_table1(expvas_cfg)
    with pytest.raises(ValueError):
        run_table2(dothan_defaults())


def test_table2_monotone(expvas_cfg):
    table = run_table2(expvas_cfg)
    assert table.values.shape == (3, 3)
    # each column strictly decreasing in sigma_lo
    assert np.all(np.diff(table.values, axis=0) < 0.0)


def test_table_csv_written(tmp_path, dothan_cfg):
    table = run_table1(dothan_cfg)
    p = tmp_path / "t1.csv"
    table.write_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "sigma_lo,gamma=-0.2,gamma=0,gamma=0.2"
    assert len(lines) == 4


def test_trajectories_stats_and_dump(dothan_cfg):
    traj = run_trajectories(dothan_cfg)
    assert traj.n_paths == 400
    assert len(traj.dump) == 3
    assert traj.times.size == dothan_cfg.mc.n_steps + 1
    b, qv, x, u, m = traj.dump[0]
    assert b[0] == 0.0 and qv[0] == 0.0 and x[0] == dothan_cfg.model.x0
    # discounted stopped values start at u(0, x0)
    sol = solve_pde(dothan_cfg)
    assert m[0] == pytest.approx(sol.evaluate(0.0, dothan_cfg.model.x0), rel=1e-12)
    assert traj.mean_u_terminal >= 0.0


def test_trajectories_reproducible(tmp_path, dothan_cfg):
    a = run_trajectories(dothan_cfg)
    b = run_trajectories(dothan_cfg)
    pa, pb = tmp_path / "a.csv", tmp_path / "b.csv"
    a.write_csv(pa)
    b.write_csv(pb)
    assert pa.read_bytes() == pb.read_bytes()


def test_trajectories_chunking_invariant(dothan_cfg):
    one = run_trajectories(dothan_cfg)
    other = run_trajectories(dothan_cfg.with_override("mc", "chunk", "37").validate())
    assert one.mean_u_terminal == other.mean_u_terminal
    assert one.mean_m_terminal == other.mean_m_terminal


def test_trajectories_censoring_warns(dothan_cfg):
    tight = dothan_cfg.apply_overrides(
        ["pde.x_hi=6.0", "pde.dx=0.06", "band.sigma_lo=1.0", "mc.n_steps=40"]
    )
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        traj = run_trajectories(tight)
    assert traj.n_censored > 0
    assert any("valid region" in str(w.message) for w in caught)


def test_eps_sweep_structure(dothan_cfg):
    sweep = run_epsilon_sweep(dothan_cfg, [1e-2, 1e-3, 1e-6])
    assert np.isnan(sweep.diffs[0])
    assert np.all(np.diff(sweep.diffs[1:]) <= 0.0)
    assert np.all(sweep.bound_gaps >= 0.0)
    with pytest.raises(ValueError):
        run_epsilon_sweep(dothan_cfg, [2.0])


def test_classical_check_small(dothan_cfg):
    cfg = dothan_cfg.apply_overrides(
        ["band.sigma_lo=1.0", "band.sigma_hi=1.0", "mc.n_steps=50"]
    )
    check = classical_check(cfg, n_paths=2000)
    assert check.drift_statistic < 0.05
    assert check.mean_m_by_time.size == cfg.mc.n_steps + 1


def test_classical_check_requires_degenerate_band(dothan_cfg):
    with pytest.raises(ValueError):
        classical_check(dothan_cfg, n_paths=100)
