import numpy as np
import pytest

from app.core.exceptions import CollinearityError, DimensionError
from app.core.inference import (
    approx_loglik,
    bootstrap_ci_glv,
    closed_form_drift,
    closed_form_LM,
    confidence_intervals,
    fisher_information,
    fit_glv_ls,
    fit_sglv_amle,
    predict_one_step,
)
from app.core.numerics import RngStream
from app.core.simulator import simulate_observed
from app.models.experiment import CASE1_A, CASE1_R, CASE1_X0
from app.models.fit import GlvFit, SglvFit
from app.models.params import ModelParams, ObservationSeries
from app.models.simulation import SamplingSchedule, SimConfig

HAND_TIMES = np.array([0.0, 0.1, 0.2, 0.4, 0.5])
HAND_U = np.array([-1.0, -0.8, -0.75, -0.5, -0.6])


@pytest.fixture
def hand_series():
    return ObservationSeries(times=HAND_TIMES, values=np.exp(HAND_U))


@pytest.fixture
def noisy_series(make_euler_series, irregular_gaps):
    rng = np.random.default_rng(21)
    noise = rng.normal(size=(irregular_gaps.size, 2)) * 0.1 * np.sqrt(irregular_gaps)[:, None]
    a = np.array([[-1.5, 0.4], [-0.3, -1.2]])
    return make_euler_series([0.8, 0.6], a, np.log([0.05, 0.9]), irregular_gaps, noise)


def normal_equation_oracle(series):
    """Per-species weighted least squares solved through its normal equations."""
    x = series.values[:-1]
    du = np.diff(series.log_values, axis=0)
    gaps = np.diff(series.times)
    g = np.hstack([np.ones((x.shape[0], 1)), x])
    lhs = (g * gaps[:, None]).T @ g
    rhs = g.T @ du
    coef = np.linalg.solve(lhs, rhs).T
    return coef[:, 0], coef[:, 1:]


def random_series(rng, n_species, n_obs=80):
    a = -2 * np.eye(n_species) + 0.3 * rng.normal(size=(n_species, n_species))
    growth = rng.uniform(0.5, 1.5, size=n_species)
    gaps = rng.choice([0.1, 0.3, 0.5], size=n_obs - 1, p=[0.7, 0.2, 0.1])
    u = np.empty((n_obs, n_species))
    u[0] = np.log(rng.uniform(0.05, 0.5, size=n_species))
    for i, dt in enumerate(gaps):
        u[i + 1] = (u[i] + (growth + a @ np.exp(u[i])) * dt
                    + 0.1 * np.sqrt(dt) * rng.normal(size=n_species))
    return ObservationSeries(times=np.concatenate([[0], np.cumsum(gaps)]), values=np.exp(u))


class TestFitSglvAmle:
    def test_noiseless_scalar_recovery(self, make_euler_series, irregular_gaps):
        series = make_euler_series([0.5], [[-1.0]], np.log(0.05), irregular_gaps)
        fit = fit_sglv_amle(series)
        np.testing.assert_allclose(fit.R_hat, [0.5], atol=1e-10)
        np.testing.assert_allclose(fit.a_hat, [[-1.0]], atol=1e-10)
        assert fit.sigma2_hat[0] <= 1e-20
        np.testing.assert_allclose(fit.r_hat, fit.R_hat, atol=1e-18)

    def test_noiseless_two_species_recovery(self, noiseless_two_species):
        series, growth, a = noiseless_two_species
        fit = fit_sglv_amle(series)
        np.testing.assert_allclose(fit.R_hat, growth, atol=1e-10)
        np.testing.assert_allclose(fit.a_hat, a, atol=1e-10)
        assert np.all(fit.sigma2_hat <= 1e-18)

    def test_hand_dataset_matches_normal_equations(self, hand_series):
        fit = fit_sglv_amle(hand_series)
        growth, a = normal_equation_oracle(hand_series)
        np.testing.assert_allclose(fit.R_hat, growth, rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(fit.a_hat, a, rtol=1e-10, atol=1e-12)

    def test_growth_identity_is_exact(self, noisy_series):
        fit = fit_sglv_amle(noisy_series)
        np.testing.assert_array_equal(fit.r_hat, fit.R_hat + fit.sigma2_hat / 2)
        assert np.all(fit.sigma2_hat >= 0)

    def test_residuals_satisfy_normal_equations(self, noisy_series):
        fit = fit_sglv_amle(noisy_series)
        x = noisy_series.values[:-1]
        du = np.diff(noisy_series.log_values, axis=0)
        gaps = noisy_series.gaps
        resid = du - (fit.R_hat + x @ fit.a_hat.T) * gaps[:, None]
        scale = np.abs(du).sum()
        np.testing.assert_allclose(resid.sum(axis=0), 0, atol=1e-9 * scale)
        np.testing.assert_allclose(x.T @ resid, 0, atol=1e-9 * scale)

    def test_time_shift_invariance(self, noisy_series):
        shifted = ObservationSeries(times=noisy_series.times + 17.5, values=noisy_series.values)
        a, b = fit_sglv_amle(noisy_series), fit_sglv_amle(shifted)
        np.testing.assert_allclose(a.a_hat, b.a_hat, rtol=1e-9)
        np.testing.assert_allclose(a.r_hat, b.r_hat, rtol=1e-9)
        np.testing.assert_allclose(a.sigma2_hat, b.sigma2_hat, rtol=1e-9)

    def test_constant_species_is_collinear(self, irregular_gaps):
        times = np.concatenate([[0], np.cumsum(irregular_gaps)])
        rng = np.random.default_rng(0)
        values = np.column_stack([rng.uniform(0.1, 0.9, times.size), np.full(times.size, 0.3)])
        series = ObservationSeries(times=times, values=values, species=["alpha", "beta"])
        with pytest.raises(CollinearityError) as err:
            fit_sglv_amle(series)
        assert "beta" in err.value.columns
        assert "beta" in str(err.value)

    def test_too_few_observations(self):
        series = ObservationSeries(times=[0, 1, 2], values=[[1.0, 2.0], [1.5, 2.5], [1.2, 2.1]])
        with pytest.raises(DimensionError):
            fit_sglv_amle(series)

    def test_all_transitions_equal_full_fit(self, noisy_series):
        full = fit_sglv_amle(noisy_series)
        explicit = fit_sglv_amle(noisy_series, np.arange(noisy_series.n_obs - 1))
        np.testing.assert_allclose(full.a_hat, explicit.a_hat, rtol=1e-12)
        np.testing.assert_allclose(full.sigma2_hat, explicit.sigma2_hat, rtol=1e-12)
        assert explicit.total_time == pytest.approx(noisy_series.total_time)

    def test_transition_subset(self, noisy_series):
        keep = np.arange(0, noisy_series.n_obs - 1, 2)
        fit = fit_sglv_amle(noisy_series, keep)
        assert fit.n_obs == keep.size + 1
        assert fit.total_time == pytest.approx(noisy_series.gaps[keep].sum())
        growth, a = closed_form_drift(noisy_series, keep)
        np.testing.assert_allclose(fit.a_hat, a, rtol=1e-8, atol=1e-10)

    def test_transition_out_of_range(self, noisy_series):
        with pytest.raises(DimensionError):
            fit_sglv_amle(noisy_series, [0, noisy_series.n_obs - 1])

    def test_fit_round_trips_through_dict(self, noisy_series):
        fit = fit_sglv_amle(noisy_series)
        again = SglvFit.from_dict(fit.to_dict())
        np.testing.assert_array_equal(again.a_hat, fit.a_hat)
        assert again.total_time == fit.total_time


class TestClosedForm:
    def test_constant_series_has_zero_l(self):
        series = ObservationSeries(times=[0, 0.1, 0.4, 0.5], values=[[0.3]] * 4)
        l_mat, m_mat = closed_form_LM(series)
        np.testing.assert_allclose(l_mat, 0, atol=1e-12)
        np.testing.assert_allclose(m_mat, 0, atol=1e-12)

    def test_hand_dataset_term_by_term(self, hand_series):
        l_mat, m_mat = closed_form_LM(hand_series)
        x = np.exp(HAND_U[:-1])
        d = np.diff(HAND_TIMES)
        du = np.diff(HAND_U)
        total = 0.0
        sx = sxx = sdux = 0.0
        for xi, di, dui in zip(x, d, du):
            total += di
            sx += xi * di
            sxx += xi * xi * di
            sdux += dui * xi
        l_oracle = total * sxx - sx * sx
        m_oracle = (HAND_U[-1] - HAND_U[0]) * sx - total * sdux
        assert l_mat[0, 0] == pytest.approx(l_oracle, rel=1e-12)
        assert m_mat[0, 0] == pytest.approx(m_oracle, rel=1e-12)

    def test_regression_solves_closed_form(self, noisy_series):
        fit = fit_sglv_amle(noisy_series)
        l_mat, m_mat = closed_form_LM(noisy_series)
        for k in range(2):
            np.testing.assert_allclose(l_mat @ fit.a_hat[k], -m_mat[k],
                                       rtol=1e-8, atol=1e-8 * np.abs(m_mat).max())

    @pytest.mark.parametrize("n_species", [1, 2, 5])
    def test_estimator_identity_on_random_series(self, n_species):
        rng = np.random.default_rng(100 + n_species)
        for _ in range(17):
            series = random_series(rng, n_species)
            fit = fit_sglv_amle(series)
            l_mat, m_mat = closed_form_LM(series)
            scale = np.abs(m_mat).max()
            np.testing.assert_allclose(fit.a_hat @ l_mat.T, -m_mat, rtol=1e-8, atol=1e-8 * scale)

            growth, a = normal_equation_oracle(series)
            np.testing.assert_allclose(fit.a_hat, a, rtol=1e-8, atol=1e-9)
            np.testing.assert_allclose(fit.R_hat, growth, rtol=1e-8, atol=1e-9)


class TestFisherAndIntervals:
    def test_matrices_identical_and_psd(self, noisy_series):
        info = fisher_information(noisy_series)
        assert info.shape == (2, 3, 3)
        np.testing.assert_array_equal(info[0], info[1])
        np.testing.assert_array_equal(info[0], info[0].T)
        rng = np.random.default_rng(1)
        for v in rng.normal(size=(100, 3)):
            assert v @ info[0] @ v >= -1e-12

    def test_constant_series_is_rank_one(self):
        series = ObservationSeries(times=[0, 0.1, 0.4, 0.5], values=[[0.3]] * 4)
        info = fisher_information(series)[0]
        np.testing.assert_allclose(info, np.outer([1, 0.3], [1, 0.3]), atol=1e-15)

    def test_singular_information_reported(self):
        info = np.outer([1, 0.3], [1, 0.3])[None]
        fit = SglvFit(r_hat=np.array([1.0]), a_hat=np.array([[-1.0]]),
                      sigma2_hat=np.array([0.01]), R_hat=np.array([0.995]),
                      fisher=info, n_obs=4, total_time=0.5)
        ci = confidence_intervals(fit)
        assert ci.status == ["information_singular"]
        assert np.all(np.isnan(ci.lower))
        assert not ci.significant.any()
        assert ci.to_dict()["lower"] == [[None, None]]

    def test_zero_noise_gives_zero_width(self, noiseless_two_species):
        series, _, _ = noiseless_two_species
        ci = confidence_intervals(fit_sglv_amle(series))
        assert np.all(ci.half_width < 1e-8)

    def test_half_width_scales_with_sigma(self, noisy_series):
        fit = fit_sglv_amle(noisy_series)
        doubled = fit.model_copy(update={"sigma2_hat": fit.sigma2_hat * np.array([4.0, 1.0])})
        base, wide = confidence_intervals(fit), confidence_intervals(doubled)
        np.testing.assert_allclose(wide.half_width[0], 2 * base.half_width[0], rtol=1e-12)
        np.testing.assert_allclose(wide.half_width[1], base.half_width[1], rtol=1e-12)

    def test_half_width_formula(self, noisy_series):
        fit = fit_sglv_amle(noisy_series)
        ci = confidence_intervals(fit, level=0.95)
        x = noisy_series.values[:-1]
        g = np.hstack([np.ones((x.shape[0], 1)), x])
        cov = np.linalg.inv((g * noisy_series.gaps[:, None]).T @ g)
        expected = 1.959963984540054 * np.sqrt(fit.sigma2_hat[0] * np.diag(cov))
        np.testing.assert_allclose(ci.half_width[0], expected, rtol=1e-8)

    def test_network_holds_significant_off_diagonal_entries(self, noisy_series):
        fit = fit_sglv_amle(noisy_series)
        ci = confidence_intervals(fit)
        network = ci.network(growth=fit.r_hat)
        expected = {(l, k) for k in range(2) for l in range(2)
                    if k != l and (ci.lower[k, l + 1] > 0 or ci.upper[k, l + 1] < 0)}
        labels = ci.labels
        got = {(labels.index(e["from"]), labels.index(e["to"])) for e in network["edges"]}
        assert got == expected
        assert [n["growth_rate"] for n in network["nodes"]] == pytest.approx(fit.r_hat.tolist())

    def test_rejects_bad_level(self, noisy_series):
        with pytest.raises(ValueError):
            confidence_intervals(fit_sglv_amle(noisy_series), level=1.0)


class TestGlv:
    def test_equal_spacing_matches_sglv(self, make_euler_series):
        rng = np.random.default_rng(4)
        gaps = np.full(50, 0.2)
        noise = 0.05 * rng.normal(size=(50, 2))
        series = make_euler_series([0.8, 0.6], [[-1.5, 0.4], [-0.3, -1.2]],
                                   np.log([0.05, 0.9]), gaps, noise)
        sglv, glv = fit_sglv_amle(series), fit_glv_ls(series)
        np.testing.assert_allclose(glv.a_hat, sglv.a_hat, rtol=1e-10, atol=1e-10)
        np.testing.assert_allclose(glv.r_hat, sglv.R_hat, rtol=1e-10, atol=1e-10)

    def test_noiseless_recovery(self, noiseless_two_species):
        series, growth, a = noiseless_two_species
        fit = fit_glv_ls(series)
        np.testing.assert_allclose(fit.r_hat, growth, atol=1e-10)
        np.testing.assert_allclose(fit.a_hat, a, atol=1e-10)
        assert fit.residual_ss < 1e-18

    def test_round_trip(self, noisy_series):
        fit = fit_glv_ls(noisy_series)
        np.testing.assert_array_equal(GlvFit.from_dict(fit.to_dict()).a_hat, fit.a_hat)


class TestPredictOneStep:
    def _fit(self, growth, a):
        return GlvFit(r_hat=np.array([growth]), a_hat=np.array([[a]]), residual_ss=0.0)

    def test_equilibrium(self):
        assert predict_one_step(self._fit(1.0, -1.0), [0.0], 0.1) == pytest.approx([0.0])

    def test_zero_drift_off_unit(self):
        u = predict_one_step(self._fit(0.5, -0.25), [np.log(2)], 0.2)
        assert u == pytest.approx([np.log(2)])

    def test_pure_drift(self):
        assert predict_one_step(self._fit(1.0, 0.0), [0.0], 0.3) == pytest.approx([0.3])

    def test_sglv_uses_corrected_growth(self):
        fit = SglvFit(r_hat=np.array([1.5]), a_hat=np.array([[0.0]]),
                      sigma2_hat=np.array([1.0]), R_hat=np.array([1.0]),
                      fisher=np.eye(2)[None], n_obs=10, total_time=1.0)
        assert predict_one_step(fit, [0.0], 0.3) == pytest.approx([0.3])

    def test_stacked_states(self):
        fit = self._fit(1.0, 0.0)
        out = predict_one_step(fit, [[0.0], [1.0]], np.array([0.1, 0.2]))
        np.testing.assert_allclose(out, [[0.1], [1.2]])

    def test_rejects_non_positive_dt(self):
        with pytest.raises(ValueError):
            predict_one_step(self._fit(1.0, 0.0), [0.0], 0.0)


class TestApproxLoglik:
    def test_perfect_fit_unit_variance(self, make_euler_series, irregular_gaps):
        series = make_euler_series([0.5], [[-1.0]], np.log(0.05), irregular_gaps)
        params = ModelParams(r=[1.0], a=[[-1.0]], sigma=[1.0])
        assert approx_loglik(params, [1.0], series) == pytest.approx(0.0, abs=1e-20)

    def test_variance_scaling(self, make_euler_series, irregular_gaps):
        series = make_euler_series([0.5, 0.3], [[-1.0, 0.0], [0.0, -1.0]],
                                   np.log([0.05, 0.1]), irregular_gaps)
        lam = 2.5
        base = approx_loglik(ModelParams(r=[1.0, 0.8], a=-np.eye(2), sigma=[1, 1]),
                             [1.0, 1.0], series)
        scaled = approx_loglik(
            ModelParams(r=[0.5 + lam / 2, 0.3 + lam / 2], a=-np.eye(2), sigma=[1, 1]),
            [lam, lam], series)
        expected = -2 * (series.n_obs - 1) * np.log(lam)
        assert scaled - base == pytest.approx(expected, rel=1e-10)

    def test_fit_is_a_maximizer(self, noisy_series):
        fit = fit_sglv_amle(noisy_series)
        best = approx_loglik(fit.to_params(), fit.sigma2_hat, noisy_series)
        assert best == pytest.approx(fit.loglik, rel=1e-10)
        rng = np.random.default_rng(9)
        for _ in range(100):
            delta = rng.normal(size=(2, 3))
            delta *= 0.01 / np.linalg.norm(delta)
            params = ModelParams(r=fit.r_hat + delta[:, 0], a=fit.a_hat + delta[:, 1:],
                                 sigma=np.sqrt(fit.sigma2_hat))
            assert approx_loglik(params, fit.sigma2_hat, noisy_series) <= best

    def test_rejects_zero_variance(self, noisy_series):
        params = ModelParams(r=[1, 1], a=-np.eye(2), sigma=[1, 1])
        with pytest.raises(ValueError):
            approx_loglik(params, [0.0, 1.0], noisy_series)


class TestBootstrap:
    def test_zero_residuals_give_zero_width(self, noiseless_two_species):
        series, _, _ = noiseless_two_species
        fit = fit_glv_ls(series)
        ci = bootstrap_ci_glv(series, fit, B=200, rng=RngStream(1))
        assert np.all(ci.half_width < 1e-8)
        assert ci.method == "residual_bootstrap"
        assert ci.replicates == 200

    def test_widens_with_noise(self, make_euler_series, irregular_gaps):
        rng = np.random.default_rng(12)
        base_noise = rng.normal(size=(irregular_gaps.size, 2)) * np.sqrt(irregular_gaps)[:, None]
        widths = []
        for scale in (0.05, 0.1, 0.2):
            series = make_euler_series([0.8, 0.6], [[-1.5, 0.4], [-0.3, -1.2]],
                                       np.log([0.05, 0.9]), irregular_gaps, scale * base_noise)
            ci = bootstrap_ci_glv(series, fit_glv_ls(series), B=500, rng=RngStream(3))
            widths.append(ci.half_width.mean())
        assert widths[0] < widths[1] < widths[2]

    def test_intervals_cover_estimate(self, noisy_series):
        fit = fit_glv_ls(noisy_series)
        ci = bootstrap_ci_glv(noisy_series, fit, B=300, rng=RngStream(4))
        assert np.all(ci.lower <= ci.estimate)
        assert np.all(ci.upper >= ci.estimate)

    def test_rejects_small_b(self, noisy_series):
        with pytest.raises(ValueError):
            bootstrap_ci_glv(noisy_series, fit_glv_ls(noisy_series), B=10)


def _fine_case1(sigma, n_obs, seed, stream_id):
    params = ModelParams(r=CASE1_R, a=CASE1_A, sigma=[sigma] * 5)
    schedule = SamplingSchedule(gaps=[0.01], probs=[1.0], n_obs=n_obs)
    sim = SimConfig(x0=CASE1_X0, seed=seed, stream_id=stream_id)
    return params, simulate_observed(params, sim, schedule)


@pytest.mark.slow
def test_sigma2_asymptotic_normality():
    n_obs = 2000
    z = []
    for j in range(500):
        params, series = _fine_case1(0.1, n_obs, 31, j)
        fit = fit_sglv_amle(series)
        z.append(np.sqrt(n_obs / 2) * (fit.sigma2_hat - params.sigma2) / params.sigma2)
    z = np.array(z)
    assert np.all(np.abs(z.mean(axis=0)) < 0.2)
    var = z.var(axis=0, ddof=1)
    assert np.all((var > 0.7) & (var < 1.4))


@pytest.mark.slow
def test_wald_interval_coverage():
    covered = np.zeros((5, 5))
    replicates = 200
    for j in range(replicates):
        params, series = _fine_case1(0.1, 20000, 47, j)
        ci = confidence_intervals(fit_sglv_amle(series))
        covered += (ci.lower[:, 1:] <= params.a) & (params.a <= ci.upper[:, 1:])
    coverage = covered / replicates
    assert np.all((coverage >= 0.88) & (coverage <= 0.99))
