import numpy as np
import pytest
from scipy.integrate import quad, solve_ivp

from pullbackdim.basis import coeffs_to_values, dealias_points
from pullbackdim.errors import BlowupError, ConfigError
from pullbackdim.segments import HistorySegment, constant_segment, random_segment
from pullbackdim.solver import (
    ModelConfig,
    evolve_rds,
    integrate_v,
    lipschitz_majorant_check,
    noise_for,
)
from pullbackdim.spectral import characteristic_roots

TAU = 0.5


def _cfg(**kw):
    base = dict(
        mu=1.0, sigma=0.0, tau=TAU, F_coeffs=(), f_kind="zero", f_lipschitz=0.0,
        g_coeffs=np.zeros((1, 1)), n_modes=1, h=0.0125,
    )
    base.update(kw)
    return ModelConfig(**base)


class TestModelConfig:
    def test_rejects_non_integer_delay_ratio(self):
        with pytest.raises(ConfigError, match="tau/model.h"):
            _cfg(h=0.013)

    def test_rejects_even_degree_polynomial(self):
        with pytest.raises(ConfigError):
            _cfg(F_coeffs=(1.0, -1.0))

    def test_rejects_positive_leading_coefficient(self):
        with pytest.raises(ConfigError):
            _cfg(F_coeffs=(0.0, 0.0, 1.0))

    def test_rejects_unknown_f_kind(self):
        with pytest.raises(ConfigError):
            _cfg(f_kind="tanh")

    def test_linear_baseline_allowed(self):
        assert _cfg(F_coeffs=()).F_coeffs == ()

    def test_f_menu_lipschitz_and_fixed_point(self):
        for kind in ("scaled_sine", "rational_saturation"):
            cfg = _cfg(f_kind=kind, f_lipschitz=0.3)
            f = cfg.f_func()
            u = np.linspace(-10, 10, 2001)
            assert f(np.zeros(3)).tolist() == [0.0, 0.0, 0.0]
            slopes = np.abs(np.diff(f(u)) / np.diff(u))
            assert slopes.max() <= 0.3 + 1e-9

    def test_round_trip_dict(self, nonlinear_cfg):
        back = ModelConfig.from_dict(nonlinear_cfg.to_dict())
        assert back.to_dict() == nonlinear_cfg.to_dict()


class TestIntegrateV:
    def test_heat_decay_exact(self):
        cfg = _cfg(mu=0.7)
        psi = constant_segment(TAU, cfg.n_tau, np.array([1.0]))
        traj = integrate_v(cfg, None, psi, 3.0)
        assert abs(traj.norms[-1] - np.exp(-(1.0 + 0.7) * 3.0)) < 1e-8

    def test_delayed_decay_matches_principal_root(self):
        cfg = _cfg(sigma=0.1, h=0.01)
        lam = characteristic_roots(2.0, 0.1, TAU)[0].lam.real
        psi = random_segment(np.random.default_rng(1), TAU, cfg.n_tau, 1)
        traj = integrate_v(cfg, None, psi, 15 * TAU)
        t = traj.times
        mask = (t >= 5 * TAU) & (t <= 15 * TAU)
        slope = np.polyfit(t[mask], np.log(traj.norms[mask]), 1)[0]
        assert abs(slope - lam) / abs(lam) < 0.02

    def test_single_mode_nonlinear_matches_scalar_oracle(self):
        # With one retained mode, F(u) = u - u^3 reduces to the scalar flow
        # c' = -(1+mu) c + c - g3 c^3 with g3 the quartic self-interaction
        # of the first basis function, computed here by quadrature.
        mu, c0, T = 1.0, 0.6, 0.5
        e1 = lambda x: np.sqrt(2 / np.pi) * np.sin(x)
        g3, _ = quad(lambda x: e1(x) ** 4, 0, np.pi)
        cfg = _cfg(mu=mu, F_coeffs=(1.0, 0.0, -1.0), h=TAU / 6400)
        psi = constant_segment(TAU, cfg.n_tau, np.array([c0]))
        traj = integrate_v(cfg, None, psi, T)
        sol = solve_ivp(
            lambda t, y: -(1 + mu) * y + y - g3 * y**3, (0, T), [c0],
            rtol=1e-12, atol=1e-14,
        )
        assert abs(traj.terminal.at_zero()[0] - sol.y[0, -1]) < 1e-5

    def test_two_mode_nonlinear_matches_ivp_on_same_vector_field(self):
        # Adaptive RK on the identical spatially discretized right-hand side
        # isolates the time-stepping error.
        cfg = _cfg(mu=0.8, sigma=0.0, F_coeffs=(0.5, 0.0, -1.0),
                   n_modes=2, g_coeffs=np.zeros((1, 2)), h=TAU / 2000)
        from pullbackdim.basis import apply_polynomial

        a = cfg.a_vec

        def rhs(t, y):
            return -a * y + apply_polynomial(y[None, :], cfg.F_coeffs)[0]

        y0 = np.array([0.5, -0.3])
        psi = constant_segment(TAU, cfg.n_tau, y0)
        traj = integrate_v(cfg, None, psi, 1.0)
        sol = solve_ivp(rhs, (0, 1.0), y0, rtol=1e-12, atol=1e-14)
        assert np.max(np.abs(traj.terminal.at_zero() - sol.y[:, -1])) < 1e-5

    def test_segment_shift_consistency_exact(self):
        cfg = _cfg(sigma=0.1, F_coeffs=(0.5, 0.0, -1.0), h=TAU / 8)
        psi = random_segment(np.random.default_rng(2), TAU, cfg.n_tau, 1)
        traj = integrate_v(cfg, None, psi, 0.5, store_segments=True)
        segs = traj.segments
        for a, b in zip(segs[:-1], segs[1:]):
            assert np.array_equal(a.values[1:], b.values[:-1])

    def test_convergence_order_first(self):
        # F is treated by exponential Euler, so halving h halves the error.
        def terminal(h):
            cfg = _cfg(mu=1.0, sigma=0.2, F_coeffs=(1.0, 0.0, -1.0),
                       n_modes=2, g_coeffs=np.zeros((1, 2)), h=h)
            psi = constant_segment(TAU, cfg.n_tau, np.array([0.5, 0.2]))
            return integrate_v(cfg, None, psi, 2.0).terminal.at_zero()

        v1, v2, v3 = terminal(TAU / 32), terminal(TAU / 64), terminal(TAU / 128)
        ratio = np.linalg.norm(v1 - v2) / np.linalg.norm(v2 - v3)
        assert 1.5 <= ratio <= 2.5

    def test_dissipativity_no_blowup(self, nonlinear_cfg):
        noise = noise_for(nonlinear_cfg, 3, -TAU - 0.1, 100.0 + 0.1)
        psi = random_segment(np.random.default_rng(3), TAU, nonlinear_cfg.n_tau,
                             nonlinear_cfg.n_modes, radius=2.0)
        traj = integrate_v(nonlinear_cfg, noise, psi, 100.0)
        # re-enters a fixed ball and stays there
        second_half = traj.norms[traj.norms.size // 2 :]
        assert second_half.max() < 1.0
        assert np.isfinite(traj.norms).all()

    def test_blowup_guard_trips(self):
        cfg = _cfg(F_coeffs=(15.0, 0.0, -1e-12), g_coeffs=np.array([[0.1]]),
                   h=0.0125)
        noise = noise_for(cfg, 5, -TAU - 0.1, 10.0)
        psi = constant_segment(TAU, cfg.n_tau, np.array([0.1]))
        with pytest.raises(BlowupError) as exc:
            integrate_v(cfg, noise, psi, 8.0, ceiling=1e4)
        assert exc.value.norm > 1e4
        assert 0 < exc.value.t <= 8.0

    def test_noise_coverage_validated(self, nonlinear_cfg):
        noise = noise_for(nonlinear_cfg, 1, -TAU, 1.0)
        psi = random_segment(np.random.default_rng(4), TAU, nonlinear_cfg.n_tau,
                             nonlinear_cfg.n_modes)
        with pytest.raises(ConfigError):
            integrate_v(nonlinear_cfg, noise, psi, 5.0)

    def test_grid_mismatch_rejected(self):
        cfg = _cfg()
        with pytest.raises(ConfigError):
            integrate_v(cfg, None, constant_segment(TAU, 7, np.array([1.0])), 1.0)


class TestEvolveRDS:
    def test_identity_at_zero(self, nonlinear_cfg):
        noise = noise_for(nonlinear_cfg, 7, -TAU - 0.1, 1.0)
        phi = random_segment(np.random.default_rng(5), TAU, nonlinear_cfg.n_tau,
                             nonlinear_cfg.n_modes)
        out = evolve_rds(nonlinear_cfg, noise, phi, 0.0)
        assert np.array_equal(out.values, phi.values)

    def test_zero_noise_reduces_to_v_equation(self):
        cfg = _cfg(sigma=0.1, F_coeffs=(0.5, 0.0, -1.0))
        noise = noise_for(cfg, 1, -TAU - 0.1, 2.0)  # g = 0, so z = 0
        phi = random_segment(np.random.default_rng(6), TAU, cfg.n_tau, 1)
        u = evolve_rds(cfg, noise, phi, 1.0)
        v = integrate_v(cfg, noise, phi, 1.0).terminal
        assert np.allclose(u.values, v.values, atol=1e-15)

    def test_cocycle_property(self, nonlinear_cfg):
        h = nonlinear_cfg.h
        s, t = 20 * h, 30 * h
        noise = noise_for(nonlinear_cfg, 11, -TAU - 0.1, s + t + TAU + 0.1)
        phi = random_segment(np.random.default_rng(7), TAU, nonlinear_cfg.n_tau,
                             nonlinear_cfg.n_modes)
        joint = evolve_rds(nonlinear_cfg, noise, phi, s + t)
        step = evolve_rds(nonlinear_cfg, noise,
                          evolve_rds(nonlinear_cfg, noise, phi, s), t, start=s)
        assert (joint - step).norm() <= 1e-8 * max(1.0, phi.norm())

    def test_off_grid_time_rejected(self, nonlinear_cfg):
        noise = noise_for(nonlinear_cfg, 1, -TAU - 0.1, 1.0)
        phi = random_segment(np.random.default_rng(8), TAU, nonlinear_cfg.n_tau,
                             nonlinear_cfg.n_modes)
        with pytest.raises(ConfigError):
            evolve_rds(nonlinear_cfg, noise, phi, nonlinear_cfg.h / 3)


class TestLipschitzMajorantCheck:
    def test_equal_fields_give_zero(self):
        cfg = _cfg(F_coeffs=(1.0, 0.0, -1.0))
        v = np.full(16, 0.3)
        res = lipschitz_majorant_check(cfg, v, v, r_value=0.0, c=1.0)
        assert res.ratio == 0.0
        assert res.satisfied and res.precondition_ok

    def test_constant_cubic_fields_hand_value(self):
        # F(u) = -u^3 on constants 0.2 and 0.1: ratio v1^2+v1 v2+v2^2 = 0.07,
        # majorant |a_3| (c + (c+1) r)^2 = 1 at c=1, r=0.
        cfg = _cfg(F_coeffs=(0.0, 0.0, -1.0))
        v1 = np.full(32, 0.2)
        v2 = np.full(32, 0.1)
        res = lipschitz_majorant_check(cfg, v1, v2, r_value=0.0, c=1.0)
        assert res.ratio == pytest.approx(0.07, rel=1e-12)
        assert res.majorant == pytest.approx(1.0)
        assert res.satisfied

    def test_precondition_violation_skips(self):
        cfg = _cfg(F_coeffs=(0.0, 0.0, -1.0))
        v1 = np.full(8, 5.0)
        res = lipschitz_majorant_check(cfg, v1, np.zeros(8), r_value=0.0, c=1.0)
        assert not res.precondition_ok
        assert np.isnan(res.ratio)

    def test_monte_carlo_audit(self):
        cfg = _cfg(F_coeffs=(1.0, 0.0, -1.0))
        rng = np.random.default_rng(123)
        c, r = 1.0, 0.5
        ball = c + (c + 1) * r
        n_pts = dealias_points(16)
        for _ in range(200):
            v1 = rng.uniform(-ball, ball, size=n_pts)
            v2 = rng.uniform(-ball, ball, size=n_pts)
            res = lipschitz_majorant_check(cfg, v1, v2, r_value=r, c=c)
            assert res.precondition_ok and res.satisfied


def test_trajectory_energy_diagnostic():
    cfg = _cfg()
    psi = constant_segment(TAU, cfg.n_tau, np.array([2.0]))
    traj = integrate_v(cfg, None, psi, 0.5)
    assert np.allclose(traj.energy, traj.norms**2)
    assert traj.step_rejections == 0
