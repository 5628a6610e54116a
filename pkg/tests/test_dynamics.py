import math

import numpy as np
import pytest

from spingas import dynamics as dyn
from spingas.dynamics import (
    CompiledModel,
    IntegrationControls,
    IntegrationError,
    SimParams,
    Trajectory,
    critical_pump_rate,
    gamma_of_temperature,
    ground_rhs,
    integrate,
    project_coherences,
    response_time,
    seed_sensitivity,
    spin_exchange_term,
    steady_state,
)
from conftest import random_density

GAMMA = 58.0


class TestExchangeTerm:
    def test_vanishes_on_mixed_state(self, system):
        # the isotropic part alone vanishes: direct component summation
        rho0 = np.eye(16) / 16
        s_mats = system.ops_g["S"].matrices
        iso = 0.75 * rho0 - sum(s @ rho0 @ s for s in s_mats)
        assert np.abs(iso).max() < 1e-14
        out = spin_exchange_term(rho0, 300.0, system.ops_g["S"])
        assert np.abs(out).max() < 1e-12

    def test_zero_rate(self, system, rng):
        out = spin_exchange_term(random_density(rng), 0.0, system.ops_g["S"])
        assert np.abs(out).max() == 0.0

    def test_conserves_total_spin(self, system, rng):
        fz = system.ops_g["F"].z.matrix
        for _ in range(100):
            out = spin_exchange_term(random_density(rng), 265.0, system.ops_g["S"])
            assert abs(np.trace(fz @ out).real) < 1e-10

    def test_trace_free_and_hermitian(self, system, rng):
        out = spin_exchange_term(random_density(rng), 265.0, system.ops_g["S"])
        assert abs(np.trace(out)) < 1e-12
        assert np.abs(out - out.conj().T).max() < 1e-12

    def test_phi_form_identity(self, system, rng):
        # independent construction: -qJ[3/4 rho - S rho S - sum_j M_j(...)]
        rho = random_density(rng)
        s_mats = system.ops_g["S"].matrices
        qj = 211.0
        m = [np.trace(rho @ s).real for s in s_mats]
        explicit = -(0.75 * rho - sum(s @ rho @ s for s in s_mats))
        crosses = [
            s_mats[1] @ rho @ s_mats[2] - s_mats[2] @ rho @ s_mats[1],
            s_mats[2] @ rho @ s_mats[0] - s_mats[0] @ rho @ s_mats[2],
            s_mats[0] @ rho @ s_mats[1] - s_mats[1] @ rho @ s_mats[0],
        ]
        for mj, sj, cross in zip(m, s_mats, crosses):
            explicit = explicit + mj * (rho @ sj + sj @ rho - 2j * cross)
        explicit *= qj
        out = spin_exchange_term(rho, qj, system.ops_g["S"])
        assert np.abs(out - explicit).max() < 1e-12


class TestProjection:
    def test_diagonal_unchanged(self, system, rng):
        rho = np.diag(rng.random(16)).astype(complex)
        rho /= np.trace(rho)
        for mode in ("hyperfine", "hyperfine+zeeman", "none"):
            out = project_coherences(rho, mode, system.basis_g)
            assert np.abs(out - rho).max() == 0.0

    def test_hyperfine_blocks_removed(self, system, rng):
        rho = random_density(rng)
        out = project_coherences(rho, "hyperfine", system.basis_g)
        sl3 = system.basis_g.block_slice(3)
        sl4 = system.basis_g.block_slice(4)
        assert np.abs(out[sl3, sl4]).max() == 0.0
        assert np.abs(out[sl4, sl3]).max() == 0.0
        # within-manifold coherences survive
        assert np.abs(out[sl3, sl3] - np.diag(np.diag(out[sl3, sl3]))).max() > 0

    def test_zeeman_mode_leaves_diagonal_only(self, system, rng):
        out = project_coherences(random_density(rng), "hyperfine+zeeman", system.basis_g)
        assert np.abs(out - np.diag(np.diag(out))).max() == 0.0

    def test_trace_preserved_exactly(self, system, rng):
        rho = random_density(rng)
        for mode in ("hyperfine", "hyperfine+zeeman"):
            out = project_coherences(rho, mode, system.basis_g)
            assert np.trace(out).real == pytest.approx(1.0, abs=1e-14)


class TestCompiledModel:
    @pytest.mark.parametrize("mode", ["hyperfine+zeeman", "hyperfine"])
    def test_coords_match_matrix_path(self, mode, rng):
        p = SimParams.from_rates(i_over_gamma=1.5, j_over_gamma=3.0,
                                 h_over_gamma=0.4, projection_mode=mode,
                                 b_z=1e-4 if mode == "hyperfine" else 1.0)
        model = CompiledModel(p)
        s = model.sub.from_matrix(random_density(rng))
        rho = model.sub.to_matrix(s)
        d_coords = model.rhs_coords(s)
        d_ref = model.sub.from_matrix(ground_rhs(rho, model))
        assert np.abs(d_coords - d_ref).max() < 1e-9 * max(np.abs(d_ref).max(), 1.0)

    def test_rhs_traceless(self, rng):
        p = SimParams.from_rates(i_over_gamma=2.0, j_over_gamma=2.5)
        model = CompiledModel(p)
        for _ in range(10):
            out = ground_rhs(random_density(rng), model)
            assert abs(np.trace(out)) < 1e-10 * GAMMA

    def test_unpolarized_dark_fixed_point(self):
        p = SimParams(j_exchange=0.0)
        model = CompiledModel(p)
        rhs = ground_rhs(np.eye(16) / 16, model)
        assert np.abs(rhs).max() < 1e-12 * GAMMA

    def test_magnetization_normalization(self):
        p = SimParams()
        model = CompiledModel(p)
        stretched = np.zeros((16, 16), dtype=complex)
        stretched[model.system.basis_g.index(4, 4),
                  model.system.basis_g.index(4, 4)] = 1.0
        assert model.magnetization(model.sub.from_matrix(stretched)) == pytest.approx(1.0)


class TestIntegration:
    def test_dark_relaxation_rate(self):
        p = SimParams(seed_polarization=5e-3)
        traj = integrate(p, t_end=3.0 / GAMMA)
        mask = traj.magnetization > 0
        rate = -np.polyfit(traj.times[mask], np.log(traj.magnetization[mask]), 1)[0]
        assert rate == pytest.approx(GAMMA, rel=0.05)
        assert rate == pytest.approx(GAMMA, rel=1e-4)

    def test_response_crossing_on_exponential(self):
        # synthetic saturating exponential: the 63% crossing must equal the
        # time constant within 0.5%
        tau0 = 0.1
        t = np.linspace(0, 1.0, 4000)
        m = 0.4 * (1 - np.exp(-t / tau0))
        traj = Trajectory(times=t, magnetization=m, final_state=np.eye(16) / 16,
                          steady=True)
        # 63% of the final value of this trace, mapped back to the time axis
        target_fraction = 0.63 * 0.4 / m[-1]
        crossing = traj.response_crossing(target_fraction)
        assert crossing == pytest.approx(-tau0 * math.log(1 - 0.63), rel=5e-3)

    def test_zero_seed_symmetry(self):
        p = SimParams.from_rates(i_over_gamma=2.0, j_over_gamma=3.0,
                                 seed_polarization=0.0)
        traj = integrate(p, t_end=20 / GAMMA, stop_when_steady=True)
        assert np.abs(traj.magnetization).max() < 1e-9

    def test_seed_sign_equivariance(self):
        p = SimParams.from_rates(i_over_gamma=2.0, j_over_gamma=3.0)
        model = CompiledModel(p)
        plus = steady_state(p, seed=+1e-4, model=model)
        minus = steady_state(p, seed=-1e-4, model=model)
        assert plus.m_ss > 0.1
        assert abs(plus.m_ss + minus.m_ss) < 1e-6

    def test_invariants_enforced(self, rng):
        p = SimParams.from_rates(i_over_gamma=1.0, j_over_gamma=2.0)
        model = CompiledModel(p)
        traj = integrate(p, t_end=5 / GAMMA, model=model)
        rho = traj.final_state
        assert np.trace(rho).real == pytest.approx(1.0, abs=1e-9)
        assert np.abs(rho - rho.conj().T).max() < 1e-10
        assert np.linalg.eigvalsh(rho).min() > -1e-9

    def test_rejects_nonpositive_horizon(self):
        with pytest.raises(ValueError):
            integrate(SimParams(), t_end=0.0)


class TestSteadyState:
    def test_disordered_no_pump(self):
        res = steady_state(SimParams.from_rates(0.0, 2.3, seed_polarization=0.0))
        assert abs(res.m_ss) < 1e-9
        assert res.converged

    def test_ordered_interior(self):
        res = steady_state(SimParams.from_rates(4.5, 3.8))
        assert res.converged
        assert abs(res.m_ss) > 0.35

    def test_weak_bias_susceptibility(self):
        # disordered-limit calibration: dM/dH = 1/Gamma at H -> 0
        dh = 1e-3
        mp = steady_state(SimParams.from_rates(0.0, 2.3, h_over_gamma=dh,
                                               seed_polarization=0.0)).m_ss
        assert mp / dh == pytest.approx(1.0, rel=0.02)


class TestResponseTime:
    def test_floor_in_disordered_phase(self):
        r = response_time(SimParams.from_rates(0.3, 1.0))
        assert r.floored
        assert r.tau == pytest.approx(1.0 / GAMMA)

    def test_critical_slowdown(self):
        i0 = critical_pump_rate(3.7)
        r = response_time(SimParams.from_rates(i0 * 1.1, 3.7))
        assert not r.floored
        assert r.tau > 10.0 / GAMMA

    def test_seed_sensitivity_report(self):
        p = SimParams.from_rates(1.5, 3.7)
        rep = seed_sensitivity(p, factors=(1.0, 0.1))
        assert rep["tau_by_factor"][0.1] > rep["tau_by_factor"][1.0]
        assert rep["dtau_dlog_eps"] < 0


class TestHelpers:
    def test_gamma_of_temperature(self):
        assert gamma_of_temperature(75.0) == 58.0
        assert gamma_of_temperature(87.0) == pytest.approx(58.0 + 0.35 * 12)

    def test_boundary_locator_regression(self):
        assert critical_pump_rate(3.7) == pytest.approx(0.8156, abs=0.01)

    def test_params_validation(self):
        with pytest.raises(ValueError):
            SimParams(gamma=-1.0)
        with pytest.raises(ValueError):
            SimParams(seed_polarization=0.5)
        with pytest.raises(ValueError):
            SimParams(projection_mode="bogus")


class TestSteadyDetection:
    def test_stiff_point_converges(self):
        # extreme exchange rate: the window-averaged criterion must not
        # float on integrator noise (regression for the instantaneous gate)
        p = SimParams.from_rates(i_over_gamma=0.2, j_over_gamma=150.0,
                                 seed_polarization=0.0)
        res = steady_state(p, max_time=300.0 / GAMMA)
        assert res.converged
        assert abs(res.m_ss) < 1e-6

    def test_max_step_control(self):
        # dark decay has the analytic answer M(t) = eps * exp(-Gamma t)
        p = SimParams(j_exchange=0.0, seed_polarization=1e-3)
        horizon = 1.0 / GAMMA
        free = integrate(p, t_end=horizon)
        capped = integrate(p, t_end=horizon,
                           controls=IntegrationControls(max_step=horizon / 200))
        assert len(capped.times) > 200 > len(free.times)
        exact = 1e-3 * math.exp(-1.0)
        assert capped.magnetization[-1] == pytest.approx(exact, rel=1e-9)
        assert free.magnetization[-1] == pytest.approx(exact, rel=1e-4)

    def test_symmetric_fixed_point_and_rate(self):
        p = SimParams.from_rates(i_over_gamma=2.0, j_over_gamma=3.0,
                                 seed_polarization=0.0)
        model = CompiledModel(p)
        s_star = model.symmetric_fixed_point()
        assert np.abs(model.rhs_coords(s_star)).max() < 1e-9 * GAMMA
        assert model.magnetization(s_star) == pytest.approx(0.0, abs=1e-12)
        # (2, 3) is in the ordered phase: fluctuations grow
        assert model.slow_mode_rate() > 0
        p0 = SimParams.from_rates(i_over_gamma=0.3, j_over_gamma=1.0,
                                  seed_polarization=0.0)
        assert CompiledModel(p0).slow_mode_rate() < 0
