import itertools

import numpy as np
import pytest

from basinlab import _rng
from basinlab.maps1d import apply, north_south
from basinlab.randomwalk import (DiscreteChain, ProbProfile, absorption_solve, build_orbit_chain,
                                 monte_carlo_absorption, perturb, rotation_chain,
                                 stationary_power_iteration, transfer, truncation_drift,
                                 verify_proposition, walk_step, zeta_cylinder)

NS = north_south(0.1)
COS = ProbProfile.cosine(0.2)


def absorbing(up):
    up = np.asarray(up, dtype=float)
    return DiscreteChain(np.linspace(0, 1, len(up)), up, "absorbing")


class TestWalkStep:
    def test_near_certain_forward(self):
        stream = _rng.Stream(1)
        p = ProbProfile.constant(0.999999)
        etas = np.array([walk_step(NS, p, 0.25, stream)[0] for _ in range(100_000)])
        assert np.mean(etas == 1) >= 0.99999 - 3e-5

    def test_profile_values(self):
        assert COS(0.25) == pytest.approx(0.5, abs=1e-15)
        assert COS(0.5) == pytest.approx(0.7, abs=1e-15)

    def test_step_moves_along_orbit(self):
        stream = _rng.Stream(4)
        eta, x = walk_step(NS, COS, 0.25, stream)
        assert x == apply(NS, 0.25, eta)


class TestZeta:
    def test_constant_profile(self):
        assert zeta_cylinder(NS, ProbProfile.constant(0.7), 0.3, [1, 1, -1]) == pytest.approx(0.147, abs=1e-15)

    def test_empty(self):
        assert zeta_cylinder(NS, COS, 0.3, []) == 1.0

    def test_single_factor(self):
        assert zeta_cylinder(NS, COS, 0.25, [1]) == pytest.approx(0.5, abs=1e-15)

    @pytest.mark.parametrize("x", [0.1, 0.25, 0.61])
    def test_probability_on_each_depth(self, x):
        for k in (1, 4, 8, 12):
            total = sum(zeta_cylinder(NS, COS, x, a) for a in itertools.product((-1, 1), repeat=k))
            assert total == pytest.approx(1.0, abs=1e-12)

    def test_recursion(self):
        x = 0.37
        for tail in itertools.product((-1, 1), repeat=3):
            for a in (-1, 1):
                lhs = zeta_cylinder(NS, COS, x, (a,) + tail)
                rhs = COS.signed(a, x) * zeta_cylinder(NS, COS, apply(NS, x, a), tail)
                assert abs(lhs - rhs) <= 1e-14


class TestAbsorption:
    def test_symmetric(self):
        assert absorption_solve(absorbing([0, .5, .5, .5, 0]))[1] == pytest.approx(0.25, abs=1e-14)

    def test_gamblers_ruin(self):
        assert absorption_solve(absorbing([0, 2 / 3, 0]))[1] == pytest.approx(2 / 3, abs=1e-14)

    def test_two_by_two(self):
        chain = absorbing([0, 0.7, 0.3, 0])
        p = absorption_solve(chain)
        # P1 = 0.7 P2, P2 = 0.3 + 0.7 P1
        p2 = 0.3 / (1 - 0.49)
        assert p[1] == pytest.approx(0.7 * p2, abs=1e-14) and p[2] == pytest.approx(p2, abs=1e-14)
        mc, se = monte_carlo_absorption(chain, 1, 1_000_000, seed=5)
        assert abs(mc - p[1]) < 3 * se

    def test_monotone_for_equal_weights(self):
        p = absorption_solve(absorbing([0] + [0.45] * 20 + [0]))
        assert np.all(np.diff(p) > 0)

    def test_monte_carlo_matches_orbit_chain(self):
        chain = build_orbit_chain(NS, COS, 0.25, 50)
        exact = absorption_solve(chain)[chain.origin]
        mc, se = monte_carlo_absorption(chain, chain.origin, 100_000, seed=8)
        assert abs(mc - exact) < 3 * se


class TestOrbitChain:
    def test_constant_profile(self):
        chain = build_orbit_chain(NS, ProbProfile.constant(0.6), 0.25, 3)
        assert len(chain) == 7 and np.all(chain.up == 0.6)

    def test_middle_weight(self):
        chain = build_orbit_chain(NS, COS, 0.25, 1)
        assert chain.up[1] == pytest.approx(0.5, abs=1e-15)
        assert chain.sites[2] == apply(NS, 0.25)

    def test_truncation_drift(self):
        assert truncation_drift(NS, COS, 0.25, 40, 60) < 1e-3

    def test_fixed_point_rejected(self):
        from basinlab.errors import ConstructionError
        with pytest.raises(ConstructionError):
            build_orbit_chain(NS, COS, 0.5, 5)


class TestStationary:
    def test_symmetric_uniform(self):
        meas = stationary_power_iteration(rotation_chain(64, ProbProfile.constant(0.5)))
        assert np.allclose(meas.mass, 1 / 64, atol=1e-15) and meas.residual < 1e-14

    def test_biased_still_uniform(self):
        chain = rotation_chain(64, ProbProfile.constant(0.7))
        meas = stationary_power_iteration(chain)
        assert np.allclose(meas.mass, 1 / 64, atol=1e-14)

    def test_fixed_point_property(self):
        chain = rotation_chain(64, COS)
        m = stationary_power_iteration(chain).mass
        assert abs(m.sum() - 1) < 1e-12 and np.all(m >= 0)
        assert np.abs(transfer(chain, m) - m).sum() < 1e-10


class TestProposition:
    def test_stationary_measure_passes(self):
        chain = rotation_chain(64, COS)
        m = stationary_power_iteration(chain).mass
        stat, inv = verify_proposition(chain, m, 3)
        assert stat < 1e-10 and inv < 1e-10

    def test_perturbed_fails_both(self):
        chain = rotation_chain(64, COS)
        m = perturb(stationary_power_iteration(chain).mass)
        stat, inv = verify_proposition(chain, m, 3)
        assert stat > 1e-3 and inv > 1e-3 / 64

    def test_symmetric_uniform_exact(self):
        chain = rotation_chain(64, ProbProfile.constant(0.5))
        stat, inv = verify_proposition(chain, np.full(64, 1 / 64), 1)
        assert stat <= 1e-14 and inv <= 1e-14

    @pytest.mark.parametrize("b", [0.05, 0.2, 0.45])
    def test_residuals_vanish_together(self, b):
        chain = rotation_chain(32, ProbProfile.cosine(b))
        m = stationary_power_iteration(chain).mass
        for cand in (m, perturb(m, 0.05), np.full(32, 1 / 32)):
            stat, inv = verify_proposition(chain, cand, 2)
            assert (stat < 1e-10) == (inv < 1e-10)
