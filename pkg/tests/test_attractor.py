import numpy as np
import pytest

from pullbackdim.attractor import (
    PointCloud,
    cloud_diameter,
    estimate_absorbing_radius,
    hausdorff_distance,
    load_cloud,
    pullback_sample,
    save_cloud,
    verify_squeezing,
)
from pullbackdim.bound import BoundInputs
from pullbackdim.errors import ConfigError
from pullbackdim.solver import ModelConfig

TAU = 0.5


@pytest.fixture(scope="module")
def linear_clouds(linear_cfg):
    return pullback_sample(linear_cfg, seed=4, horizons=(2.0, 5.0, 10.0),
                           n_initial=16, c=1.0)


class TestPullbackSample:
    def test_linear_stable_collapses_to_point(self, linear_clouds):
        assert linear_clouds[-1].metadata["diameter"] < 1e-6

    def test_diameters_shrink_with_horizon(self, linear_clouds):
        diams = [c.metadata["diameter"] for c in linear_clouds]
        assert diams[0] > diams[1] > diams[2]

    def test_hausdorff_metadata_recorded(self, linear_clouds):
        assert linear_clouds[0].metadata["hausdorff_to_previous"] is None
        assert linear_clouds[1].metadata["hausdorff_to_previous"] > 0

    def test_deterministic_attractor_concentrates(self):
        # Supercritical growth (F'(0) = 3 > mu_1 + mu) gives a nontrivial
        # deterministic attractor; later horizons barely move the cloud.
        cfg = ModelConfig(mu=0.5, sigma=0.0, tau=TAU, F_coeffs=(3.0, 0.0, -1.0),
                          f_kind="zero", f_lipschitz=0.0, g_coeffs=np.zeros((1, 2)),
                          n_modes=2, h=0.025)
        clouds = pullback_sample(cfg, seed=9, horizons=(5.0, 15.0, 30.0),
                                 n_initial=24, c=1.5)
        last = clouds[-1]
        assert last.metadata["diameter"] > 0.1  # genuinely nontrivial
        assert last.metadata["hausdorff_to_previous"] < 0.01 * last.metadata["diameter"]

    def test_same_seed_reproduces_cloud(self, nonlinear_cfg):
        a = pullback_sample(nonlinear_cfg, 5, (2.0,), 8, c=0.5)[0]
        b = pullback_sample(nonlinear_cfg, 5, (2.0,), 8, c=0.5)[0]
        assert np.array_equal(a.points, b.points)

    def test_different_seeds_differ(self, nonlinear_cfg):
        a = pullback_sample(nonlinear_cfg, 5, (2.0,), 8, c=0.5)[0]
        b = pullback_sample(nonlinear_cfg, 6, (2.0,), 8, c=0.5)[0]
        assert hausdorff_distance(a.points, b.points) > 0

    def test_validation(self, nonlinear_cfg):
        with pytest.raises(ConfigError):
            pullback_sample(nonlinear_cfg, 1, (2.0, 1.0), 8, c=1.0)
        with pytest.raises(ConfigError):
            pullback_sample(nonlinear_cfg, 1, (2.0,), 1, c=1.0)
        with pytest.raises(ConfigError):
            pullback_sample(nonlinear_cfg, 1, (), 8, c=1.0)

    def test_default_radius_estimated(self, nonlinear_cfg):
        clouds = pullback_sample(nonlinear_cfg, 5, (2.0,), 4)
        assert clouds[0].metadata["c"] > 0
        assert clouds[0].metadata["ball_radius"] >= clouds[0].metadata["c"]


class TestEmbedding:
    def test_round_trip_exact(self, linear_clouds):
        cloud = linear_clouds[0]
        seg = cloud.segment(3)
        assert np.array_equal(seg.encode(), cloud.points[3])
        assert seg.n_tau == cloud.n_tau
        assert seg.n_modes == cloud.n_modes

    def test_embedding_dimension_invariant(self, linear_clouds):
        cloud = linear_clouds[0]
        assert cloud.dim == (cloud.n_tau + 1) * cloud.n_modes

    def test_invalid_embedding_rejected(self):
        with pytest.raises(ConfigError):
            PointCloud(points=np.zeros((4, 7)), horizon=1.0, seed=0,
                       tau=0.5, n_tau=2, n_modes=2)

    def test_nonfinite_points_rejected(self):
        pts = np.zeros((4, 6))
        pts[1, 2] = np.nan
        with pytest.raises(ConfigError):
            PointCloud(points=pts, horizon=1.0, seed=0, tau=0.5, n_tau=2, n_modes=2)


class TestPersistence:
    def test_binary_round_trip(self, tmp_path, linear_clouds):
        cloud = linear_clouds[1]
        path = tmp_path / "cloud.bin"
        save_cloud(cloud, path)
        back = load_cloud(path)
        assert np.array_equal(back.points, cloud.points)
        assert back.horizon == cloud.horizon
        assert back.seed == cloud.seed
        assert back.metadata["noise"] == cloud.metadata["noise"]

    def test_binary_layout(self, tmp_path, linear_clouds):
        cloud = linear_clouds[0]
        path = tmp_path / "cloud.bin"
        save_cloud(cloud, path)
        raw = path.read_bytes()
        dims, count = np.frombuffer(raw[:16], dtype="<i8")
        assert (dims, count) == (cloud.dim, cloud.n_points)
        assert len(raw) == 16 + 8 * dims * count


class TestVerifySqueezing:
    def _inputs(self, model, cfg, c=1.0):
        return BoundInputs(
            alpha=1.0, t0=1.0, K=model.K, M=model.M, rho1=model.rho1,
            rhom=model.rho_cut, k_m=model.k_m, L_f=cfg.f_lipschitz,
            er=0.0, er2=0.0, c=c, F_coeffs=cfg.F_coeffs,
        )

    def test_identical_points_trivially_pass(self, linear_cfg, model_cut2):
        clouds = pullback_sample(linear_cfg, 4, (2.0,), 4, c=1.0, forward=2.0)
        base = clouds[0]
        dup = PointCloud(
            points=np.vstack([base.points[0], base.points[0]]),
            horizon=base.horizon, seed=base.seed, tau=base.tau,
            n_tau=base.n_tau, n_modes=base.n_modes, metadata=base.metadata,
        )
        rep = verify_squeezing(dup, model_cut2, self._inputs(model_cut2, linear_cfg),
                               t0=1.0, n_pairs=1, cfg=linear_cfg)
        assert rep.slow_rate == 1.0 and rep.fast_rate == 1.0
        assert rep.delta0_norms[0] == 0.0

    def test_linear_case_full_satisfaction(self, linear_cfg, model_cut2):
        clouds = pullback_sample(linear_cfg, 4, (1.0, 2.0), 16, c=1.0, forward=2.0)
        rep = verify_squeezing(clouds[-1], model_cut2,
                               self._inputs(model_cut2, linear_cfg),
                               t0=1.0, n_pairs=40, cfg=linear_cfg)
        assert rep.slow_rate == 1.0
        assert rep.fast_rate == 1.0

    def test_rhs_reproducible_from_constants(self, linear_cfg, model_cut2):
        clouds = pullback_sample(linear_cfg, 4, (2.0,), 8, c=1.0, forward=2.0)
        rep = verify_squeezing(clouds[0], model_cut2,
                               self._inputs(model_cut2, linear_cfg),
                               t0=1.0, n_pairs=10, cfg=linear_cfg)
        c = rep.constants
        gap = c["rho1"] - c["rhom"]
        growth = (c["M"] * c["L_f"] + c["rho1"]) * c["t0"]
        slow = c["M"] * np.exp(growth + c["R_integral"])
        fast = (c["K"] * np.exp(c["rhom"] * c["t0"])
                + c["K"] * c["M"] / np.sqrt(2 * gap)
                * np.exp(growth + c["M"] * c["R_integral"] + c["R2_integral"])
                + c["K"] * c["M"] * c["L_f"] / gap
                * np.exp(growth + c["M"] * c["R_integral"]))
        assert np.allclose(rep.slow_rhs, slow * rep.delta0_norms)
        assert np.allclose(rep.fast_rhs, fast * rep.delta0_norms)
        assert "approximate attractor samples" in rep.caveat

    def test_q_contraction_rate_in_linear_case(self, model_cut2):
        # Per-pair fast-component ratio decays at least at the cutoff rate.
        # The delay window needs enough grid points that the projection's
        # trapezoid leak stays below the contracted component.
        cfg = ModelConfig(mu=1.0, sigma=0.1, tau=TAU, F_coeffs=(),
                          f_kind="zero", f_lipschitz=0.0,
                          g_coeffs=np.zeros((1, 3)), n_modes=3, h=TAU / 80)
        clouds = pullback_sample(cfg, 4, (1.0,), 12, c=1.0, forward=3.0)
        t0 = 2.5  # 5 tau
        rep = verify_squeezing(clouds[0], model_cut2,
                               self._inputs(model_cut2, cfg),
                               t0=t0, n_pairs=20, cfg=cfg)
        ratios = rep.fast_lhs / rep.delta0_norms
        slopes = np.log(ratios) / t0
        assert np.all(slopes <= model_cut2.rho_cut + 0.05)

    def test_forward_window_enforced(self, linear_cfg, model_cut2):
        clouds = pullback_sample(linear_cfg, 4, (2.0,), 8, c=1.0, forward=1.0)
        with pytest.raises(ConfigError):
            verify_squeezing(clouds[0], model_cut2,
                             self._inputs(model_cut2, linear_cfg),
                             t0=2.0, n_pairs=5, cfg=linear_cfg)

    def test_pair_count_validated(self, linear_cfg, model_cut2):
        clouds = pullback_sample(linear_cfg, 4, (2.0,), 4, c=1.0, forward=2.0)
        with pytest.raises(ConfigError):
            verify_squeezing(clouds[0], model_cut2,
                             self._inputs(model_cut2, linear_cfg),
                             t0=1.0, n_pairs=100, cfg=linear_cfg)

    def test_report_serializes(self, linear_cfg, model_cut2):
        clouds = pullback_sample(linear_cfg, 4, (2.0,), 6, c=1.0, forward=2.0)
        rep = verify_squeezing(clouds[0], model_cut2,
                               self._inputs(model_cut2, linear_cfg),
                               t0=1.0, n_pairs=5, cfg=linear_cfg)
        d = rep.to_dict()
        assert len(d["pairs"]) == 5
        assert 0.0 <= d["slow_rate"] <= 1.0


def test_absorbing_radius_positive(nonlinear_cfg):
    c = estimate_absorbing_radius(nonlinear_cfg, seed=2, T=30.0)
    assert c > 0


def test_cloud_diameter_small_sets():
    assert cloud_diameter(np.zeros((1, 3))) == 0.0
    pts = np.array([[0.0, 0.0], [3.0, 4.0]])
    assert cloud_diameter(pts) == pytest.approx(5.0)
