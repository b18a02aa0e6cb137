import math

import numpy as np
import pytest

from basinlab.errors import ConstructionError
from basinlab.skew import (PRESETS, accumulate, birkhoff_dispersion, build_system, chi_apply,
                           fiber_lyapunov, initial_state, iterate, j_apply, s_function, s_value,
                           sn_total, start_row, step)
from basinlab.skew.core import WINDOW
from basinlab.symbolic import Word
from helpers import cells_within, occupancy


@pytest.fixture(scope="module")
def kan():
    return build_system("kan")


@pytest.fixture(scope="module")
def thm2():
    return build_system("thm2_walk")


@pytest.fixture(scope="module")
def thm3():
    return build_system("thm3_flowtime")


def base_u(system, state, L=3):
    return state.ist[2] / L ** WINDOW[L]


class TestKan:
    def test_fiber_formula(self, kan):
        nxt = step(kan, initial_state(kan, 0.0, 0.5))
        assert nxt.x == 0.5078125
        assert base_u(kan, nxt) == 0.0

    def test_boundary_and_base(self, kan):
        nxt = step(kan, initial_state(kan, 0.3, 0.0))
        assert nxt.x == 0.0
        assert base_u(kan, nxt) == pytest.approx(0.9, abs=1e-15)

    @pytest.mark.parametrize("x", [0.0, 1.0])
    def test_boundaries_invariant_exactly(self, kan, x):
        state = iterate(kan, initial_state(kan, None, x, seed=4), 10_000)
        assert state.x == x

    def test_base_matches_tripling(self, kan):
        state = initial_state(kan, 0.123, 0.4)
        u = 0.123
        for _ in range(20):
            state = step(kan, state)
            u = (3 * u) % 1.0
            assert base_u(kan, state) == pytest.approx(u, abs=1e-6)


class TestWalkPreset:
    def test_forward_step(self, thm2):
        nxt = step(thm2, initial_state(thm2, 0.0, 0.25))
        assert nxt.x == pytest.approx(0.35, abs=1e-15) and nxt.S == 1 and nxt.n == 1

    def test_backward_step(self, thm2):
        nxt = step(thm2, initial_state(thm2, 0.99, 0.25))
        assert nxt.S == -1 and nxt.x < 0.25

    def test_drift_at_south_pole(self, thm2):
        n = 100_000
        rows = np.array([start_row(-1.0, 0.5)] * 8)
        S = accumulate(thm2, rows, n, seed=3)[:, 1]
        target = 2 * 0.7 - 1
        sd = math.sqrt(4 * 0.7 * 0.3 / n)
        assert np.all(np.abs(S / n - target) < 3 * sd)


class TestFlowTimePreset:
    def test_quadrature_and_checks(self, thm3):
        us = (np.arange(4096) + 0.5) / 4096
        assert np.mean(s_function(0.2, us, 0.5)) == pytest.approx(0.1, abs=1e-12)
        assert "integral of s(u, p_S) du > 0" in thm3.render_checks()

    def test_s_values(self, thm3):
        assert s_value(thm3, 0.0, 0.5) == pytest.approx(1.1, abs=1e-15)
        xs = np.linspace(0, 1, 101)
        assert max(s_value(thm3, 0.5, x) for x in xs) <= -1 + 0.1 + 1e-15

    def test_sn_starts_at_zero(self, thm3):
        assert sn_total(initial_state(thm3, 0.2, 0.3)) == 0.0

    def test_sn_accumulates_s(self, thm3):
        state = initial_state(thm3, 0.2, 0.3)
        nxt = step(thm3, state)
        assert sn_total(nxt) == pytest.approx(s_value(thm3, 0.2, 0.3), abs=1e-14)

    def test_s_value_needs_flow_time(self, kan):
        with pytest.raises(ConstructionError):
            s_value(kan, 0.0, 0.5)

    def test_birkhoff_sn(self, thm3):
        n = 1_000_000
        rng = np.random.default_rng(21)
        rows = np.array([start_row(u, 0.5) for u in rng.random(20)])
        avg = accumulate(thm3, rows, n, seed=5)[:, 0] / n
        assert np.mean(np.abs(avg - 0.1) <= 0.002) >= 0.95


def test_thm4_base_fixed_points():
    system = build_system("thm4_multi")
    assert system.ipar[0] == 5
    for i in range(4):
        assert (5 * (i / 4)) % 1.0 == i / 4
    assert [c.name for c in system.catalog] == ["s_1", "s_2", "s_3", "s_4"]


@pytest.mark.parametrize("preset", list(PRESETS))
def test_defaults_build_and_catalog_invariant(preset):
    system = build_system(preset)
    text = system.render_checks()
    assert "FAIL" not in text and "catalog" in text


@pytest.mark.parametrize("preset", list(PRESETS))
def test_counterexample_rejected(preset):
    with pytest.raises(ConstructionError) as info:
        build_system(preset, PRESETS[preset].counterexample)
    assert "FAIL" in str(info.value)


def test_unknown_parameter():
    with pytest.raises(ConstructionError):
        build_system("kan", {"speed": 2})


class TestLyapunov:
    def test_rejects_short_runs(self, thm3):
        with pytest.raises(ValueError):
            fiber_lyapunov(thm3, "p_S", 999)

    def test_rejects_regions(self):
        with pytest.raises(ValueError):
            fiber_lyapunov(build_system("thick41"), "Lambda_l", 10_000)

    def test_north_pole_also_attracts(self, thm3):
        # g'(p_N) = 2 pi^2 and the integral of s(u, p_N) is -0.1
        est = fiber_lyapunov(thm3, "p_N", 20_000, seed=1)
        assert abs(est.value + 2 * math.pi ** 2 * 0.1) < 4 * est.stderr

    def test_deterministic(self, thm3):
        a = fiber_lyapunov(thm3, "p_S", 5_000, seed=2)
        b = fiber_lyapunov(thm3, "p_S", 5_000, seed=2)
        assert a == b and a.n == 5_000


class TestChiJ:
    def test_j_first_branches(self):
        assert j_apply(0.5, 0.25, 0.5, 0.25, 0.5) == pytest.approx((0.5, 0.25, 0.5, 0.25), abs=1e-15)

    def test_j_inverse_on_fiber(self):
        assert j_apply(0.5, 0.75, 0.5, 0.5, 0.25) == pytest.approx((0.5, 0.75, 0.25, 0.5), abs=1e-15)

    def test_chi_shifts_omega(self):
        eta = Word((1, 0, 1))
        omega = Word((0, 1, 1, 0, 1), 2, origin_offset=-2, two_sided=True)
        new_eta, new_omega = chi_apply(eta, omega)
        assert new_eta == Word((0, 1))
        assert all(new_omega[i] == omega[i + 1] for i in range(-3, 2))

    def test_chi_backwards(self):
        omega = Word((0, 1, 1, 0, 1), 2, origin_offset=-2, two_sided=True)
        _, new_omega = chi_apply(Word((0,)), omega)
        assert all(new_omega[i] == omega[i - 1] for i in range(-1, 4))

    def test_j_preserves_lebesgue(self):
        rng = np.random.default_rng(31)
        pts = rng.random((4, 1_000_000))
        ok, worst = cells_within(occupancy(j_apply(0.6, *pts), 8))
        assert ok, worst


class TestDispersion:
    def test_constant_observable(self):
        rng = np.random.default_rng(0)
        starts = (rng.random(30),)
        assert birkhoff_dispersion(lambda s: s, lambda s: np.ones_like(s[0]), starts, 100) == 0.0

    def test_identity_map_detects_non_ergodicity(self):
        rng = np.random.default_rng(1)
        x = rng.random(40)
        d = birkhoff_dispersion(lambda s: s, lambda s: s[0], (x,), 50)
        assert d == pytest.approx(np.std(x, ddof=1), rel=1e-12)

    def test_needs_twenty_starts(self):
        with pytest.raises(ValueError):
            birkhoff_dispersion(lambda s: s, lambda s: s[0], (np.zeros(5),), 10)
