import numpy as np
import pytest
from scipy import stats

from klslab.bodies import AxisCube
from klslab.densities import Gaussian, Uniform
from klslab.diagnostics import (BallSet, HalfspaceSet, SlabSet,
                                ball_walk_mixing_estimate, compute_constants,
                                conductance_tv_bound, default_shell_width,
                                direction_family, halfspace_isoperimetry,
                                linear_test, lipschitz_tail_check,
                                log_cheeger_halfspace, mixing_bounds,
                                poincare_family_min, poincare_ratio,
                                quadratic_test, slicing_constant,
                                subset_isoperimetry, thin_shell)
from klslab.estimates import Estimate, bootstrap_se, mean_estimate
from klslab.rng import RngStream
from klslab.walks import exact_sample

# closed-form targets for the standard normal
PSI_GAUSS = 0.7978845608028654          # sqrt(2/pi), halfspace cut at 0
INV_SQRT3 = 0.5773502691896258          # axis cut of the isotropic cube
VAR_CHI16 = 0.4919542013589737          # Var |x|, x ~ N(0, I_16)
SLICING_GAUSS = 0.3989422804014327      # (2 pi)^(-1/2) = f(0)^(1/n)


def _gaussian_cloud(n, count, seed):
    return RngStream(seed).generator().standard_normal((count, n))


def test_estimate_json_schema_and_mean():
    e = mean_estimate([1.0, 2.0, 3.0, 4.0])
    assert e.value == pytest.approx(2.5)
    assert e.std_error == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2.0)
    assert e.to_json_dict() == {"value": e.value, "se": e.std_error, "n": 4}
    with pytest.raises(ValueError):
        mean_estimate([])


def test_bootstrap_se_scaling():
    gen = RngStream(2).generator()
    v = gen.standard_normal(4000)
    se = bootstrap_se(v, lambda z: z.mean(), RngStream(3).generator())
    assert se == pytest.approx(1.0 / np.sqrt(4000), rel=0.5)


def test_direction_family_shape():
    X = _gaussian_cloud(5, 400, 0)
    dirs = direction_family(X, RngStream(1).generator(), n_random=7, n_eig=2)
    assert dirs.shape == (5 + 7 + 2, 5)
    assert np.allclose(np.linalg.norm(dirs, axis=1), 1.0)


def test_halfspace_psi_gaussian():
    X = _gaussian_cloud(8, 20000, 5)
    est = halfspace_isoperimetry(X, rng=RngStream(6).generator())
    assert abs(est.value - PSI_GAUSS) < 0.05
    assert est.std_error > 0


def test_halfspace_psi_rotation_invariant():
    X = _gaussian_cloud(6, 12000, 7)
    Q = np.linalg.qr(RngStream(8).generator().standard_normal((6, 6)))[0]
    a = halfspace_isoperimetry(X, rng=RngStream(9).generator())
    b = halfspace_isoperimetry(X @ Q.T, rng=RngStream(9).generator())
    assert abs(a.value - b.value) < 0.06


def test_halfspace_psi_isotropic_cube_axis_cut():
    # the flat axis marginal beats every skew direction: psi -> 1/sqrt(3)
    dens = Uniform(AxisCube(6, half_width=np.sqrt(3.0)))
    X = exact_sample(dens, 20000, RngStream(10).generator())
    est, detail = halfspace_isoperimetry(X, rng=RngStream(11).generator(),
                                         full_output=True)
    assert abs(est.value - INV_SQRT3) < 0.06
    best = detail["direction"]
    # winning direction is essentially a coordinate axis
    assert np.max(np.abs(best)) > 0.99


def test_log_cheeger_gaussian_center_cut():
    # min over s of f(s) / (m sqrt(1 + ln(1/m))) sits at s = 0 for the
    # normal; the closed form is phi(0) / (0.5 sqrt(1 + ln 2))
    X = _gaussian_cloud(4, 20000, 12)
    oracle = stats.norm.pdf(0.0) / (0.5 * np.sqrt(1.0 + np.log(2.0)))
    est = log_cheeger_halfspace(X, rng=RngStream(13).generator())
    assert abs(est.value - oracle) < 0.05


def test_subset_halfspace_matches_density():
    X = _gaussian_cloud(4, 40000, 14)
    est, rows = subset_isoperimetry(X, [HalfspaceSet(np.eye(4)[0], 0.0)],
                                    full_output=True)
    assert abs(est.value - PSI_GAUSS) < 0.05
    assert rows[0]["measure"] == pytest.approx(0.5, abs=0.02)


def test_subset_ball_set_chi_law():
    # for N(0, I_2): P(|x| <= 1) = 1 - e^{-1/2}, radial pdf at 1 = e^{-1/2}
    X = _gaussian_cloud(2, 40000, 15)
    inside = 1.0 - np.exp(-0.5)
    ratio = np.exp(-0.5) / inside
    est = subset_isoperimetry(X, [BallSet(np.zeros(2), 1.0)], eps=0.05)
    assert abs(est.value - ratio) < 0.12


def test_subset_slab_and_validation():
    X = _gaussian_cloud(3, 8000, 16)
    est = subset_isoperimetry(X, [SlabSet(np.eye(3)[0], -1.0, 1.0)])
    assert est.value > 0
    with pytest.raises(ValueError):
        SlabSet(np.eye(3)[0], 1.0, -1.0)
    far = [HalfspaceSet(np.eye(3)[0], 50.0)]  # full measure
    with pytest.raises(ValueError):
        subset_isoperimetry(X, far)


def test_default_shell_width():
    assert default_shell_width(16) == pytest.approx(0.2)


def test_thin_shell_chi_16():
    X = _gaussian_cloud(16, 40000, 17)
    est, var_est = thin_shell(X, full_output=True)
    assert abs(var_est.value - VAR_CHI16) < 0.04
    assert est.value == pytest.approx(np.sqrt(var_est.value))


def test_slicing_constant_gaussian():
    X = _gaussian_cloud(6, 20000, 18)
    est = slicing_constant(X, rng=RngStream(19).generator())
    assert abs(est.value - SLICING_GAUSS) < 0.03


def test_slicing_warns_on_anisotropy():
    X = _gaussian_cloud(3, 4000, 20) * np.array([3.0, 1.0, 1.0])
    with pytest.warns(UserWarning, match="isotropic"):
        slicing_constant(X, rng=RngStream(21).generator())


def test_poincare_linear_and_quadratic_gaussian():
    X = _gaussian_cloud(5, 30000, 22)
    lin = poincare_ratio(X, linear_test(np.eye(5)[0]))
    assert lin.value == pytest.approx(1.0, abs=0.05)
    # g = |x|^2: E|grad|^2 = 4n, Var = 2n, ratio exactly 2
    quad = poincare_ratio(X, quadratic_test(np.eye(5)))
    assert quad.value == pytest.approx(2.0, abs=0.15)


def test_poincare_family_min_reports_linear():
    X = _gaussian_cloud(4, 20000, 23)
    from klslab.diagnostics import default_test_functions
    best, all_ests = poincare_family_min(
        X, default_test_functions(4, RngStream(24).generator()))
    assert best.value == pytest.approx(1.0, abs=0.06)
    assert best.value == min(e.value for e in all_ests)
    with pytest.raises(ValueError):
        poincare_ratio(np.zeros((50, 2)), linear_test([1.0, 0.0]))


def test_conductance_tv_bound_exact_values():
    assert conductance_tv_bound(0.1, 4.0, 0) == pytest.approx(2.0)
    assert conductance_tv_bound(0.1, 4.0, 1) == pytest.approx(2.0 * 0.995)
    assert conductance_tv_bound(0.5, 1.0, 10) == pytest.approx(0.875 ** 10)


def test_conductance_bound_hits_epsilon_at_classic_time():
    # t = ceil(2 ln(sqrt(M)/eps) / phi^2) forces the envelope under eps
    for phi in (0.02, 0.1, 0.3, 0.9):
        for M in (1.5, 4.0, 100.0):
            for eps in (0.25, 0.01):
                t = int(np.ceil(2.0 * np.log(np.sqrt(M) / eps) / phi ** 2))
                assert conductance_tv_bound(phi, M, t) <= eps


def test_conductance_bound_validation():
    with pytest.raises(ValueError):
        conductance_tv_bound(1.5, 4.0, 1)
    with pytest.raises(ValueError):
        conductance_tv_bound(0.5, 0.5, 1)
    with pytest.raises(ValueError):
        conductance_tv_bound(0.5, 4.0, -1)


def test_mixing_bounds_and_ball_walk_plugin():
    lo, hi = mixing_bounds(0.2, np.e ** 4)
    assert lo == pytest.approx(5.0)
    assert hi == pytest.approx(100.0)
    assert ball_walk_mixing_estimate(10, 0.5) == pytest.approx(400.0)
    with pytest.raises(ValueError):
        mixing_bounds(0.0, 4.0)
    with pytest.raises(ValueError):
        ball_walk_mixing_estimate(10, 0.0)


def test_lipschitz_tail_rows_gaussian():
    X = _gaussian_cloud(4, 20000, 25)
    rows = lipschitz_tail_check(X, linear_test(np.eye(4)[0]))
    assert rows[0]["t"] == 0.0 and rows[0]["tail"] == 1.0
    assert all(r["envelope"] == pytest.approx(
        np.exp(-r["t"] ** 2 / (r["t"] + 2.0))) for r in rows)
    # normal marginals sit well under the envelope
    assert not any(r["flag"] for r in rows)


def test_compute_constants_report():
    X = _gaussian_cloud(8, 12000, 26)
    report = compute_constants(X, RngStream(27).generator(),
                               test_sets=[HalfspaceSet(np.eye(8)[0], 0.0)])
    assert abs(report.psi_halfspace.value - PSI_GAUSS) < 0.08
    assert report.psi_subsets is not None
    d = report.to_json_dict()
    for key in ("psi_halfspace", "sigma_thin_shell", "slicing_l",
                "poincare_zeta", "kappa_log_cheeger", "psi_subsets"):
        assert set(d[key]) == {"value", "se", "n"}
    assert d["n_dim"] == 8 and d["n_samples"] == 12000
    assert "sigma_psi_product" in d["notes"]
