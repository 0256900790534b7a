"""Four-terminal network: dual-route pairwise impedance and the edge solver."""

import cmath
import math

import numpy as np
import pytest

from acbridge import (
    ALL_PAIRS,
    CalibrationMeasurements,
    Impedance,
    NetworkEdges,
    bridge_config_from_edges,
    default_initial_edges,
    pairwise_measured,
    pairwise_measured_closed_form,
    solve_network,
)
from acbridge.errors import NotConverged

F_CAL = 20e3


def rand_edges(rng, lo=1e4, hi=1e6):
    z = {}
    for p in ALL_PAIRS:
        mag = 10 ** rng.uniform(math.log10(lo), math.log10(hi))
        ph = rng.uniform(-math.pi / 2, 0)
        z[p] = Impedance.from_complex(mag * cmath.exp(1j * ph))
    return NetworkEdges(z)


def forward_measurements(edges, f=F_CAL):
    return CalibrationMeasurements(
        z_meas={p: pairwise_measured(edges, *p) for p in ALL_PAIRS}, f=f
    )


def paper_like_edges():
    """The retrieved fixture values plus the two stated placeholder edges."""
    def rc(c, r):
        return Impedance.from_parallel_rc(r, c, F_CAL)

    return NetworkEdges({
        (1, 2): rc(990.56e-12, 15805e3),
        (1, 3): rc(989.29e-12, 11594e3),
        (0, 3): rc(1059.54e-12, 890e3),
        (2, 3): rc(4.22e-12, 28236e3),
        (0, 1): rc(100e-12, 10e6),
        (0, 2): rc(100e-12, 10e6),
    })


class TestPairwiseMeasured:
    def test_all_equal_gives_half(self):
        z = Impedance(100.0, 0.0)
        edges = NetworkEdges({p: z for p in ALL_PAIRS})
        for (i, j) in ALL_PAIRS:
            assert pairwise_measured(edges, i, j).z == pytest.approx(50 + 0j, rel=1e-12)
            assert pairwise_measured_closed_form(edges, i, j).z == pytest.approx(
                50 + 0j, rel=1e-12
            )

    def test_isolated_edge(self):
        z = {p: Impedance.OPEN for p in ALL_PAIRS}
        z[(0, 1)] = Impedance(123.0, -45.0)
        edges = NetworkEdges(z)
        assert pairwise_measured(edges, 0, 1).z == pytest.approx(123 - 45j, rel=1e-12)
        # poles without a finite path are open
        assert pairwise_measured(edges, 2, 3).is_open
        assert pairwise_measured(edges, 0, 2).is_open

    def test_laplacian_agrees_with_closed_form(self):
        rng = np.random.default_rng(31)
        worst = 0.0
        for _ in range(300):
            edges = rand_edges(rng, lo=1e3, hi=1e8)
            for (i, j) in ALL_PAIRS:
                a = pairwise_measured(edges, i, j).z
                b = pairwise_measured_closed_form(edges, i, j).z
                worst = max(worst, abs(a - b) / abs(a))
        assert worst < 1e-10

    def test_symmetry(self):
        rng = np.random.default_rng(32)
        edges = rand_edges(rng)
        for (i, j) in ALL_PAIRS:
            assert pairwise_measured(edges, i, j) == pairwise_measured(edges, j, i)

    def test_passivity(self):
        rng = np.random.default_rng(33)
        for _ in range(100):
            edges = rand_edges(rng)
            for (i, j) in ALL_PAIRS:
                assert pairwise_measured(edges, i, j).re >= -1e-12

    def test_closed_form_rejects_open_edges(self):
        z = {p: Impedance(1e3, 0) for p in ALL_PAIRS}
        z[(0, 1)] = Impedance.OPEN
        with pytest.raises(ValueError):
            pairwise_measured_closed_form(NetworkEdges(z), 2, 3)


class TestSolveNetwork:
    def test_round_trip_from_perturbed_initial(self):
        rng = np.random.default_rng(34)
        for _ in range(10):
            true = rand_edges(rng)
            meas = forward_measurements(true)
            init = NetworkEdges({
                p: Impedance.from_complex(
                    true[p].z
                    * rng.uniform(0.8, 1.2)
                    * cmath.exp(1j * rng.uniform(-0.2, 0.2))
                )
                for p in ALL_PAIRS
            })
            edges, report = solve_network(meas, init)
            assert report.converged
            for p in ALL_PAIRS:
                assert edges[p].z == pytest.approx(true[p].z, rel=1e-6)

    def test_round_trip_from_default_initial(self):
        rng = np.random.default_rng(35)
        for _ in range(10):
            true = rand_edges(rng)
            meas = forward_measurements(true)
            edges, report = solve_network(meas)
            assert report.converged
            for p in ALL_PAIRS:
                assert edges[p].z == pytest.approx(true[p].z, rel=1e-6)

    def test_wide_magnitude_spread_converges_in_measurement_space(self):
        # 5 decades of |Z|: the inverse problem turns ill-conditioned, so the
        # contract is residual convergence, not 1e-6 edge identity
        rng = np.random.default_rng(36)
        for _ in range(5):
            true = rand_edges(rng, lo=1e3, hi=1e8)
            meas = forward_measurements(true)
            init = NetworkEdges({
                p: Impedance.from_complex(
                    true[p].z
                    * rng.uniform(0.6, 1.5)
                    * cmath.exp(1j * rng.uniform(-0.2, 0.2))
                )
                for p in ALL_PAIRS
            })
            edges, report = solve_network(meas, init)
            assert report.converged
            assert report.residual_norm <= 1e-8
            for p in ALL_PAIRS:
                got = pairwise_measured(edges, *p).z
                assert got == pytest.approx(meas[p].z, rel=1e-8)

    def test_paper_values_round_trip(self):
        true = paper_like_edges()
        meas = forward_measurements(true)
        edges, report = solve_network(meas)
        assert report.converged
        for p in ALL_PAIRS:
            assert edges[p].z == pytest.approx(true[p].z, rel=1e-6)

    def test_all_equal_symmetric_fixed_point(self):
        z = Impedance(1000.0, -500.0)
        true = NetworkEdges({p: z for p in ALL_PAIRS})
        meas = forward_measurements(true)
        # default initial = 2x measurement = exactly the true edges here
        edges, report = solve_network(meas)
        assert report.converged
        for p in ALL_PAIRS:
            assert edges[p].z == pytest.approx(z.z, rel=1e-9)

    def test_monotone_residual_history(self):
        rng = np.random.default_rng(37)
        true = rand_edges(rng)
        meas = forward_measurements(true)
        _, report = solve_network(meas)
        hist = np.array(report.residual_history)
        assert np.all(np.diff(hist) < 0)

    def test_not_converged_carries_best_iterate(self):
        rng = np.random.default_rng(38)
        true = rand_edges(rng)
        meas = forward_measurements(true)
        with pytest.raises(NotConverged) as exc_info:
            solve_network(meas, max_iter=1)
        exc = exc_info.value
        assert exc.edges is not None
        assert exc.report is not None
        assert not exc.report.converged
        assert exc.report.iterations == 1

    def test_measurement_validation(self):
        z = {p: Impedance(1e3, -1e3) for p in ALL_PAIRS}
        incomplete = dict(list(z.items())[:5])
        with pytest.raises(ValueError):
            CalibrationMeasurements(z_meas=incomplete, f=F_CAL)
        active = dict(z)
        active[(0, 1)] = Impedance(-1e3, -1e3)
        with pytest.raises(ValueError):
            CalibrationMeasurements(z_meas=active, f=F_CAL)


class TestBridgeConfigFromEdges:
    def test_mapping_and_hint(self):
        edges = paper_like_edges()
        cfg, hint = bridge_config_from_edges(edges, v_hat=6.0, f_gen=20e3)
        assert cfg.z1 == edges[(1, 2)]
        assert cfg.z2 == edges[(1, 3)]
        assert cfg.z3 == edges[(0, 3)]
        assert cfg.zm == edges[(2, 3)]
        assert hint == edges[(0, 2)]
        assert cfg.v_hat == 6.0
        assert cfg.f_gen == 20e3

    def test_paper_values_give_expected_rc(self):
        from acbridge import rc_from_impedance

        edges = paper_like_edges()
        cfg, _ = bridge_config_from_edges(edges, 6.0, 20e3)
        rc1 = rc_from_impedance(cfg.z1, 20e3)
        assert rc1.c == pytest.approx(990.56e-12, rel=1e-9)
        assert rc1.r == pytest.approx(15805e3, rel=1e-9)
