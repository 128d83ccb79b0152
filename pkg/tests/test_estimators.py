import numpy as np
import pytest

from scorekde import (
    Dataset,
    ErrorCurve,
    EstimateReport,
    IsotropicGaussianTarget,
    KdeModel,
    coefficients,
    conditional_score_field,
    csm_loss,
    custom_score_field,
    empirical_optimal_score,
    energy_distance_test,
    equal_mixture_sampler,
    exact_gaussian_score,
    gaussian_mixture_logpdf,
    kde_log_density,
    kde_sample,
    kl_gaussians,
    loglog_slope,
    nn_distance_stats,
    sample_dataset,
    score_error_protocol,
    sm_loss,
    substream,
    tv_mc,
    tv_quadrature_1d,
)

BENCH_TARGET = IsotropicGaussianTarget([-5.0, 5.0], 10.0)
TV_GAUSS_SHIFT_1 = 0.3829249225480263  # TV(N(0,1), N(1,1)) = 2 Phi(1/2) - 1


def bump_field(rng, d, amplitude=1.0):
    """Random bounded smooth field: a Gaussian bump times a fixed direction."""
    center = rng.uniform(-2.0, 2.0, size=d)
    width = rng.uniform(0.5, 2.0)
    direction = amplitude * rng.standard_normal(d)

    def fn(t, pts):
        w = np.exp(-np.sum((pts - center) ** 2, axis=1) / (2.0 * width**2))
        return w[:, None] * direction

    return custom_score_field(fn, d, "bump")


def shifted_exact_field(target, offset):
    base = exact_gaussian_score(target)
    offset = np.asarray(offset, dtype=float)
    return custom_score_field(
        lambda t, pts: base.eval(t, pts) + offset, target.dim, "exact-plus-constant"
    )


class TestCsmLoss:
    def test_conditional_field_on_single_point_is_exact_zero(self):
        y = np.array([1.0, -2.0])
        report = csm_loss(
            conditional_score_field(y), Dataset(y[None]), 0.5, 500, substream(1, 0)
        )
        assert report.value == 0.0
        assert report.std_error == 0.0

    def test_gaussian_source(self):
        report = csm_loss(
            exact_gaussian_score(BENCH_TARGET), BENCH_TARGET, 0.5, 2000, substream(2, 0)
        )
        assert report.value > 0.0  # conditional target is noisier than the marginal score
        assert report.replicates == 2000
        assert report.parameters["source"] == "gaussian-target"

    def test_optimal_score_beats_perturbations_with_shared_randomness(self):
        rng = np.random.default_rng(99)
        dataset = sample_dataset(BENCH_TARGET, 10, rng)
        optimum = empirical_optimal_score(dataset)
        t = 0.5
        for k in range(5):
            bump = bump_field(rng, 2)
            perturbed = custom_score_field(
                lambda tt, pts, b=bump: optimum.eval(tt, pts) + 0.5 * b.eval(tt, pts),
                2,
                "perturbed",
            )
            base = csm_loss(optimum, dataset, t, 20_000, substream(50, k))
            other = csm_loss(perturbed, dataset, t, 20_000, substream(50, k))
            assert base.value <= other.value

    def test_rejects_bad_source(self):
        with pytest.raises(TypeError):
            csm_loss(exact_gaussian_score(BENCH_TARGET), np.zeros((3, 2)), 0.5, 10, substream(0, 0))


class TestSmLoss:
    def test_exact_score_gives_zero(self):
        report = sm_loss(
            exact_gaussian_score(BENCH_TARGET), BENCH_TARGET, 0.7, 1000, substream(3, 0)
        )
        assert report.value == 0.0
        assert report.std_error == 0.0

    def test_constant_offset_gives_squared_norm_exactly(self):
        offset = np.array([0.3, -0.4])
        field = shifted_exact_field(BENCH_TARGET, offset)
        report = sm_loss(field, BENCH_TARGET, 0.7, 1000, substream(4, 0))
        assert report.value == pytest.approx(0.25, rel=1e-12)
        assert report.std_error == pytest.approx(0.0, abs=1e-12)

    def test_empirical_score_loss_shrinks_with_n(self):
        losses = {}
        for n in (50, 500):
            values = []
            for r in range(5):
                dataset = sample_dataset(BENCH_TARGET, n, substream(60 + n, r))
                report = sm_loss(
                    empirical_optimal_score(dataset), BENCH_TARGET, 0.5, 4000, substream(61 + n, r)
                )
                values.append(report.value)
            losses[n] = float(np.mean(values))
        assert 0.0 < losses[500] < losses[50]

    def test_requires_gaussian_target(self):
        with pytest.raises(TypeError):
            sm_loss(exact_gaussian_score(BENCH_TARGET), np.zeros(2), 0.5, 10, substream(0, 0))


class TestScoreErrorProtocol:
    def test_exact_score_substitution_is_exact_zero(self):
        report = score_error_protocol(
            BENCH_TARGET,
            50,
            delta=0.1,
            horizon=1.0,
            grid_step=0.1,
            mc_points=200,
            repetitions=3,
            seed=5,
            score_factory=lambda ds: exact_gaussian_score(BENCH_TARGET),
        )
        assert report.value == 0.0
        assert report.std_error == 0.0

    def test_parameter_record(self):
        report = score_error_protocol(
            BENCH_TARGET, 20, delta=0.5, horizon=1.0, grid_step=0.25, mc_points=50,
            repetitions=2, seed=9,
        )
        params = report.parameters
        assert params["grid_points"] == 3  # 0.5, 0.75, 1.0
        assert params["n_train"] == 20 and params["seed"] == 9
        assert report.replicates == 2

    def test_mean_is_linear_in_the_splitting(self):
        # splitting the draw budget across two half-size runs agrees within
        # 3 combined standard errors
        kwargs = dict(delta=0.1, horizon=1.0, grid_step=0.1, repetitions=4)
        full = score_error_protocol(BENCH_TARGET, 50, mc_points=800, seed=100, **kwargs)
        half_a = score_error_protocol(BENCH_TARGET, 50, mc_points=400, seed=101, **kwargs)
        half_b = score_error_protocol(BENCH_TARGET, 50, mc_points=400, seed=102, **kwargs)
        combined = 0.5 * (half_a.value + half_b.value)
        se = np.sqrt(full.std_error**2 + 0.25 * half_a.std_error**2 + 0.25 * half_b.std_error**2)
        assert abs(full.value - combined) <= 3.0 * se

    def test_threads_do_not_change_values(self):
        kwargs = dict(delta=0.2, horizon=1.0, grid_step=0.2, mc_points=100, repetitions=3, seed=7)
        serial = score_error_protocol(BENCH_TARGET, 30, threads=1, **kwargs)
        threaded = score_error_protocol(BENCH_TARGET, 30, threads=3, **kwargs)
        assert serial.value == threaded.value
        assert serial.std_error == threaded.std_error

    def test_invalid_grid_rejected(self):
        with pytest.raises(ValueError):
            score_error_protocol(BENCH_TARGET, 10, delta=0.0)
        with pytest.raises(ValueError):
            score_error_protocol(BENCH_TARGET, 10, delta=2.0, horizon=1.0)
        with pytest.raises(ValueError):
            score_error_protocol(BENCH_TARGET, 10, grid_step=-0.1)


class TestKlGaussians:
    def test_identical_is_zero(self):
        assert kl_gaussians([1.0, 2.0], 3.0, [1.0, 2.0], 3.0) == 0.0

    def test_unit_shift_1d(self):
        assert kl_gaussians([1.0], 1.0, [0.0], 1.0) == pytest.approx(0.5, rel=1e-15)

    def test_transition_kernel_against_standard_normal(self):
        # closed form: KL(N(mu(t) y, sigma(t)^2 I) || N(0, I))
        #   = (1/2)[-d log sigma^2 - d + d sigma^2 + ||exp(-t) y||^2]
        rng = np.random.default_rng(6)
        for _ in range(20):
            d = int(rng.integers(1, 6))
            y = 2.0 * rng.standard_normal(d)
            t = float(np.exp(rng.uniform(np.log(0.05), np.log(5.0))))
            c = coefficients(t)
            value = kl_gaussians(c.mu * y, c.sigma2, np.zeros(d), 1.0)
            expected = 0.5 * (
                -d * np.log(c.sigma2) - d + d * c.sigma2 + np.sum((np.exp(-t) * y) ** 2)
            )
            assert value == pytest.approx(expected, rel=1e-12)

    def test_diagonal_covariances_add_over_coordinates(self):
        mp, vp = np.array([1.0, -2.0]), np.array([0.5, 2.0])
        mq, vq = np.array([0.0, 1.0]), np.array([1.5, 0.7])
        total = kl_gaussians(mp, vp, mq, vq)
        split = sum(
            kl_gaussians([mp[j]], vp[j], [mq[j]], vq[j]) for j in range(2)
        )
        assert total == pytest.approx(split, rel=1e-12)

    def test_rejects_bad_covariances(self):
        with pytest.raises(ValueError):
            kl_gaussians([0.0], 0.0, [0.0], 1.0)
        with pytest.raises(ValueError):
            kl_gaussians([0.0], 1.0, [0.0, 1.0], 1.0)


def gaussian_1d_logpdf(mean, var):
    return lambda x: gaussian_mixture_logpdf(np.array([[mean]]), var, x)


def gaussian_1d_sampler(mean, var):
    return lambda n, rng: mean + np.sqrt(var) * rng.standard_normal((n, 1))


class TestTotalVariation:
    def test_identical_densities_give_zero(self):
        log_f = gaussian_1d_logpdf(0.0, 1.0)
        report = tv_mc(
            log_f, log_f, gaussian_1d_sampler(0.0, 1.0), 5000, substream(13, 0)
        )
        assert report.value == 0.0
        assert report.std_error == 0.0

    def test_unit_shift_matches_analytic_value(self):
        sampler = equal_mixture_sampler(
            gaussian_1d_sampler(0.0, 1.0), gaussian_1d_sampler(1.0, 1.0)
        )
        report = tv_mc(
            gaussian_1d_logpdf(0.0, 1.0),
            gaussian_1d_logpdf(1.0, 1.0),
            sampler,
            100_000,
            substream(14, 0),
        )
        assert abs(report.value - TV_GAUSS_SHIFT_1) <= 3.0 * report.std_error

    def test_estimate_lies_in_unit_interval(self):
        rng = np.random.default_rng(15)
        for k in range(5):
            m1, m2 = rng.uniform(-20.0, 20.0, size=2)
            sampler = equal_mixture_sampler(
                gaussian_1d_sampler(m1, 1.0), gaussian_1d_sampler(m2, 1.0)
            )
            report = tv_mc(
                gaussian_1d_logpdf(m1, 1.0),
                gaussian_1d_logpdf(m2, 1.0),
                sampler,
                2000,
                substream(15, k),
            )
            assert 0.0 <= report.value <= 1.0

    def test_quadrature_identical_zero(self):
        log_f = gaussian_1d_logpdf(0.0, 1.0)
        assert tv_quadrature_1d(log_f, log_f, -10.0, 10.0) == 0.0

    def test_quadrature_analytic_value(self):
        value = tv_quadrature_1d(
            gaussian_1d_logpdf(0.0, 1.0), gaussian_1d_logpdf(1.0, 1.0), -12.0, 13.0
        )
        assert value == pytest.approx(TV_GAUSS_SHIFT_1, abs=1e-5)

    def test_quadrature_grid_refinement_converges(self):
        args = (gaussian_1d_logpdf(0.0, 1.0), gaussian_1d_logpdf(1.0, 1.0), -12.0, 13.0)
        coarse = tv_quadrature_1d(*args, grid_points=100_001)
        fine = tv_quadrature_1d(*args, grid_points=200_001)
        assert abs(coarse - fine) < 1e-8

    def test_quadrature_rejects_bad_inputs(self):
        log_f = gaussian_1d_logpdf(0.0, 1.0)
        with pytest.raises(ValueError):
            tv_quadrature_1d(log_f, log_f, 1.0, -1.0)
        log_2d = lambda x: gaussian_mixture_logpdf(np.zeros((1, 2)), 1.0, x)
        with pytest.raises(ValueError):
            tv_quadrature_1d(log_2d, log_2d, -1.0, 1.0)

    def test_mc_agrees_with_quadrature_on_random_mixtures(self):
        # unbiasedness oracle: 10 random 1-D equal-weight mixture pairs
        rng = np.random.default_rng(16)
        for k in range(10):
            models = []
            for _ in range(2):
                n = int(rng.integers(1, 5))
                centers = rng.uniform(-4.0, 4.0, size=(n, 1))
                models.append(KdeModel(Dataset(centers), bandwidth=float(rng.uniform(0.4, 1.5))))
            f, g = models
            sampler = equal_mixture_sampler(
                lambda n, r, m=f: kde_sample(m, n, r).points,
                lambda n, r, m=g: kde_sample(m, n, r).points,
            )
            est = tv_mc(
                lambda x, m=f: kde_log_density(m, x),
                lambda x, m=g: kde_log_density(m, x),
                sampler,
                40_000,
                substream(17, k),
            )
            exact = tv_quadrature_1d(
                lambda x, m=f: kde_log_density(m, x),
                lambda x, m=g: kde_log_density(m, x),
                -30.0,
                30.0,
            )
            assert abs(est.value - exact) <= 3.0 * max(est.std_error, 1e-6)


class TestEnergyDistanceTest:
    def test_identical_batches(self):
        pts = substream(20, 0).standard_normal((80, 2))
        result = energy_distance_test(pts, pts, permutations=200, rng=substream(20, 1))
        assert abs(result.statistic) <= 1e-10
        assert result.p_value == 1.0

    def test_null_calibration(self):
        # two independent standard-normal batches; at alpha = 0.01 the test
        # should reject in about 1% of seeds
        rejections = 0
        for seed in range(100):
            a = substream(21, seed, 0).standard_normal((200, 2))
            b = substream(21, seed, 1).standard_normal((200, 2))
            result = energy_distance_test(a, b, permutations=200, rng=substream(21, seed, 2))
            rejections += result.p_value < 0.01
        assert rejections <= 3

    def test_separated_distributions_reject(self):
        a = substream(22, 0).standard_normal((300, 1))
        b = 3.0 + substream(22, 1).standard_normal((300, 1))
        result = energy_distance_test(a, b, permutations=400, rng=substream(22, 2))
        assert result.p_value < 0.01

    def test_input_validation(self):
        a = np.zeros((10, 2))
        with pytest.raises(ValueError):
            energy_distance_test(a, np.zeros((10, 3)), permutations=200, rng=substream(0, 0))
        with pytest.raises(ValueError):
            energy_distance_test(a, a, permutations=50, rng=substream(0, 0))


class TestNnDistanceStats:
    def test_exact_match_gives_zero(self):
        train = np.array([[0.0, 0.0], [5.0, 5.0]])
        stats_ = nn_distance_stats(np.array([[5.0, 5.0]]), train)
        assert stats_.distances[0] == 0.0
        assert stats_.nearest_index[0] == 1

    def test_tie_resolves_to_lowest_index(self):
        train = np.array([[1.0, 0.0], [-1.0, 0.0]])
        stats_ = nn_distance_stats(np.array([[0.0, 0.0]]), train)
        assert stats_.nearest_index[0] == 0

    def test_permutation_invariance_of_distances(self):
        rng = np.random.default_rng(23)
        gen = rng.standard_normal((50, 3))
        train = rng.standard_normal((20, 3))
        base = nn_distance_stats(gen, train)
        perm = rng.permutation(20)
        shuffled = nn_distance_stats(gen, train[perm])
        np.testing.assert_allclose(shuffled.distances, base.distances, rtol=1e-14)

    def test_kde_draws_match_noise_norm_median(self):
        # direct-simulation oracle: with well-separated unscaled centers the
        # nearest-point distance is the norm of the kernel noise
        gamma = 0.3
        centers = 12.0 * np.arange(8.0)[:, None] * np.array([[1.0, 0.0]])
        model = KdeModel(Dataset(centers), bandwidth=gamma, center_scale=1.0)
        batch = kde_sample(model, 4000, substream(24, 0))
        observed = nn_distance_stats(batch, centers).median
        oracle = np.median(
            np.linalg.norm(gamma * substream(24, 1).standard_normal((100_000, 2)), axis=1)
        )
        assert observed == pytest.approx(oracle, rel=0.05)

    def test_fraction_below(self):
        train = np.array([[0.0]])
        stats_ = nn_distance_stats(np.array([[0.5], [2.0]]), train)
        assert stats_.fraction_below(1.0) == 0.5

    def test_empty_inputs_rejected(self):
        with pytest.raises(ValueError):
            nn_distance_stats(np.zeros((0, 2)), np.zeros((3, 2)))


class TestLogLogSlope:
    def test_inverse_law(self):
        entries = [(n, 7.3 / n) for n in (10, 100, 1000, 5000)]
        slope, intercept = loglog_slope(entries)
        assert slope == pytest.approx(-1.0, abs=1e-12)
        assert intercept == pytest.approx(np.log(7.3), abs=1e-12)

    def test_square_root_law(self):
        entries = [(n, 2.0 / np.sqrt(n)) for n in (16, 64, 256)]
        slope, _ = loglog_slope(entries)
        assert slope == pytest.approx(-0.5, abs=1e-12)

    def test_accepts_error_curve_with_reports(self):
        entries = [
            (n, EstimateReport(5.0 / n, 0.0, 1, {})) for n in (10, 100, 1000)
        ]
        curve = ErrorCurve(entries)
        slope, _ = loglog_slope(curve)
        assert slope == pytest.approx(-1.0, abs=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            loglog_slope([(10, 1.0), (20, 0.5)])
        with pytest.raises(ValueError):
            loglog_slope([(10, 1.0), (20, -0.5), (30, 0.2)])
        with pytest.raises(ValueError):
            ErrorCurve([(10, 1.0), (10, 0.5), (30, 0.1)])


class TestVarianceOfMean:
    def test_resampled_kernel_average_scales_inversely_with_n(self):
        # variance of the ensemble average of f(y) = y p_t(x | y) across
        # resampled datasets decays like 1/N
        target = IsotropicGaussianTarget([0.5, -0.5], 2.0)
        t, x = 0.5, np.array([0.3, 0.7])
        c = coefficients(t)
        norm_const = (2.0 * np.pi * c.sigma2) ** -1.0  # d = 2
        replicates = 800
        variances = []
        sizes = (10, 100, 1000)
        for i, n in enumerate(sizes):
            ys = target.sample(replicates * n, substream(25, i)).reshape(replicates, n, 2)
            sq = np.sum((x - c.mu * ys) ** 2, axis=2)
            kernel = norm_const * np.exp(-sq / (2.0 * c.sigma2))
            v = np.mean(ys * kernel[:, :, None], axis=1)
            variances.append(float(np.mean(np.sum((v - v.mean(axis=0)) ** 2, axis=1))))
        slope, _ = loglog_slope(list(zip(sizes, variances)))
        assert slope == pytest.approx(-1.0, abs=0.15)


class TestEstimateReport:
    def test_validation(self):
        with pytest.raises(ValueError):
            EstimateReport(1.0, -0.1, 10, {})
        with pytest.raises(ValueError):
            EstimateReport(1.0, 0.1, 0, {})
