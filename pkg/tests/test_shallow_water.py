import numpy as np
import pytest

from pastnet.datagen.shallow_water import (
    SWEConfig,
    cell_centers,
    check_state,
    dam_break_state,
    simulate_swe,
    swe_step,
)
from pastnet.errors import ConfigurationError, SolverDivergedError


class TestInitialCondition:
    def test_bulge_heights(self):
        # height 2.0 inside the dam radius, 1.0 outside
        n = 100
        h, hu, hv = dam_break_state(n, radius=0.5, inner=2.0, outer=1.0)
        x = cell_centers(n)
        ic = np.argmin(np.abs(x))  # nearest cell to the origin
        assert h[ic, ic] == 2.0
        far = np.argmin(np.abs(x - 1.0))  # a point at distance ~1.0 > r
        assert h[ic, far] == 1.0
        assert hu.max() == 0.0 and hv.max() == 0.0

    def test_centers_exactly_antisymmetric(self):
        for n in (16, 33, 128):
            x = cell_centers(n)
            assert np.array_equal(x[::-1], -x)


class TestConservationAndSymmetry:
    def run_steps(self, n=32, steps=200, radius=0.5, dt=0.01):
        h, hu, hv = dam_break_state(n, radius, 2.0, 1.0)
        dx = 5.0 / n
        states = [(h, hu, hv)]
        for _ in range(steps):
            h, hu, hv = swe_step(h, hu, hv, dx, dt, g=1.0)
            states.append((h, hu, hv))
        return states, dx

    def test_mass_conserved(self):
        states, dx = self.run_steps(steps=200)
        masses = [float(h.sum()) * dx * dx for h, _, _ in states]
        drift = max(abs(m - masses[0]) for m in masses) / masses[0]
        assert drift < 1e-3  # the flux form is exactly telescoping
        assert drift < 1e-12

    def test_flat_surface_is_fixed_point(self):
        n = 24
        h = np.full((n, n), 1.3)
        hu = np.zeros((n, n))
        hv = np.zeros((n, n))
        h2, hu2, hv2 = swe_step(h, hu, hv, dx=5.0 / n, dt=0.01, g=1.0)
        assert np.array_equal(h2, h)
        assert np.array_equal(hu2, hu)
        assert np.array_equal(hv2, hv)

    def test_four_fold_symmetry_preserved(self):
        states, _ = self.run_steps(n=32, steps=60)
        for h, hu, hv in states[::10]:
            assert np.abs(h - h[::-1, :]).max() < 1e-10
            assert np.abs(h - h[:, ::-1]).max() < 1e-10
            assert np.abs(h - h.T).max() < 1e-10
            assert np.abs(hu + hu[::-1, :]).max() < 1e-10  # momentum flips sign
            assert np.abs(hv + hv[:, ::-1]).max() < 1e-10
            assert np.abs(hu - hv.T).max() < 1e-10

    def test_wave_expands_outward(self):
        states, _ = self.run_steps(n=48, steps=120, dt=0.005)
        h0 = states[0][0]
        h_end = states[-1][0]
        assert h_end.max() < h0.max()  # bulge relaxes
        assert np.abs(h_end - h_end.mean()).max() > 1e-3  # but has not flattened


class TestSimulate:
    def test_paper_resolution_shapes(self):
        cfg = SWEConfig(grid=128, n_frames=3, dt_record=0.02, dt_solver=0.01)
        ds = simulate_swe(cfg, 1, seed=0)
        assert ds.data.shape == (1, 3, 3, 128, 128)
        assert ds.generator == "swe"

    def test_channels_are_height_and_momenta(self):
        cfg = SWEConfig(grid=32, n_frames=4, dt_record=0.05, dt_solver=0.01)
        ds = simulate_swe(cfg, 1, seed=1)
        h0 = ds.data[0, 0, 0]
        assert h0.max() == pytest.approx(2.0)
        assert h0.min() == pytest.approx(1.0)
        assert np.abs(ds.data[0, 0, 1:]).max() == 0.0  # starts at rest

    def test_deterministic_and_radius_drawn_per_trajectory(self):
        cfg = SWEConfig(grid=16, n_frames=2, dt_record=0.02, dt_solver=0.01)
        a = simulate_swe(cfg, 3, seed=2)
        b = simulate_swe(cfg, 3, seed=2)
        assert np.array_equal(a.data, b.data)
        radii = a.params["dam_radii"]
        assert len(set(radii)) == 3
        assert all(0.3 <= r <= 0.7 for r in radii)

    def test_positivity_diagnostic(self):
        # the CFL limiter keeps the integrated scheme positive, so the guard
        # is exercised directly with a state an over-long step would produce
        zeros = np.zeros((8, 8))
        h = np.full((8, 8), 1.0)
        h[4, 4] = -0.5
        with pytest.raises(SolverDivergedError, match="positivity"):
            check_state(h, zeros, zeros, trajectory=0, t=0.1)
        with pytest.raises(SolverDivergedError, match="finiteness"):
            check_state(np.full((8, 8), np.nan), zeros, zeros, trajectory=0, t=0.1)
        bad_step = swe_step(*dam_break_state(16, 0.5, 2.0, 1e-6), dx=5.0 / 16, dt=5.0, g=1.0)
        assert bad_step[0].min() < 0  # an uncapped step really does go negative
        with pytest.raises(SolverDivergedError, match="positivity"):
            check_state(*bad_step, trajectory=0, t=5.0)

    def test_config_validation(self):
        with pytest.raises(ConfigurationError, match="cfl"):
            simulate_swe(SWEConfig(cfl=0.9), 1)
        with pytest.raises(ConfigurationError, match="height"):
            simulate_swe(SWEConfig(inner_height=-2.0), 1)
