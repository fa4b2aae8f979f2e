"""GMM fitting, information-criterion selection, NLL, and PCA."""
import numpy as np
import pytest

from stressseq.sampling import (
    GmmModel,
    fit_gmm,
    information_criteria,
    log_density,
    nll,
    pca_project,
    select_k,
    select_unlabeled,
)


def gaussian_blob(rng, mean, cov, n):
    return rng.multivariate_normal(mean, cov, size=n)


class TestFitGmm:
    def test_single_component_recovers_mean(self):
        rng = np.random.default_rng(0)
        data = gaussian_blob(rng, [1.0, 2.0], np.eye(2), 10_000)
        model = fit_gmm(data, 1, seed=0)
        np.testing.assert_allclose(model.means[0], [1.0, 2.0], atol=0.05)
        np.testing.assert_allclose(model.covariances[0], np.eye(2), atol=0.06)

    def test_two_clusters_recover_even_mixing(self):
        rng = np.random.default_rng(1)
        a = gaussian_blob(rng, [0.0, 0.0], np.eye(2) * 0.5, 2000)
        b = gaussian_blob(rng, [8.0, 8.0], np.eye(2) * 0.5, 2000)
        data = np.concatenate([a, b])
        model = fit_gmm(data, 2, seed=1)
        np.testing.assert_allclose(sorted(model.weights), [0.5, 0.5], atol=0.05)

    def test_log_likelihood_non_decreasing_every_iteration(self):
        rng = np.random.default_rng(2)
        for trial in range(20):
            h = int(rng.integers(1, 4))
            k = int(rng.integers(1, 4))
            n = int(rng.integers(k * h * 10 + 20, k * h * 10 + 200))
            data = rng.standard_normal((n, h)) + rng.integers(0, 3, size=(n, 1)) * 3.0
            model = fit_gmm(data, k, seed=trial)
            ll = np.array(model.ll_history)
            slack = 1e-10 * np.maximum(1.0, np.abs(ll[:-1]))
            assert np.all(np.diff(ll) >= -slack)

    def test_weights_form_a_simplex_and_covariances_are_pd(self):
        rng = np.random.default_rng(3)
        data = rng.standard_normal((300, 3))
        model = fit_gmm(data, 2, seed=4)
        np.testing.assert_allclose(model.weights.sum(), 1.0, atol=1e-12)
        assert np.all(model.weights >= 0)
        for cov in model.covariances:
            np.linalg.cholesky(cov)  # raises if not PD

    def test_too_few_samples_raises(self):
        with pytest.raises(ValueError):
            fit_gmm(np.zeros((4, 2)), 2, seed=0)


class TestSelectK:
    def test_three_separated_gaussians_select_three(self):
        rng = np.random.default_rng(5)
        blobs = [
            gaussian_blob(rng, center, np.eye(2) * 0.25, 300)
            for center in ([0.0, 0.0], [10.0, 0.0], [0.0, 10.0])
        ]
        data = np.concatenate(blobs)
        chosen, table = select_k(data, range(1, 7), seed=0)
        assert chosen == 3
        assert [row["k"] for row in table] == [1, 2, 3, 4, 5, 6]

    def test_single_gaussian_selects_one(self):
        rng = np.random.default_rng(6)
        data = gaussian_blob(rng, [2.0, -1.0], np.eye(2), 600)
        chosen, _ = select_k(data, range(1, 6), seed=0)
        assert chosen == 1

    def test_information_criteria_hand_formula(self):
        # K=1, H=1, N=10: p = (K-1) + K*H + K*H(H+1)/2 = 2, and the fitted
        # single Gaussian has mu = sample mean, var = population variance
        # (plus the 1e-6 regularizer).
        data = np.array([[1.0], [2.0], [3.0], [4.0], [5.0], [6.0], [7.0], [8.0], [9.0], [10.0]])
        model = fit_gmm(data, 1, seed=0)
        mu = data.mean()
        var = data.var() + 1e-6
        hand_ll = sum(
            -0.5 * (np.log(2 * np.pi) + np.log(var) + (x - mu) ** 2 / var)
            for x in data[:, 0]
        )
        np.testing.assert_allclose(model.fit_log_likelihood, hand_ll, rtol=1e-9)
        aic, bic = information_criteria(model, 10)
        np.testing.assert_allclose(aic, 2 * 2 - 2 * hand_ll, rtol=1e-9)
        np.testing.assert_allclose(bic, 2 * np.log(10) - 2 * hand_ll, rtol=1e-9)
        assert model.parameter_count() == 2


class TestNll:
    def test_standard_normal_mode_value(self):
        model = GmmModel(
            weights=np.array([1.0]),
            means=np.zeros((1, 1)),
            covariances=np.ones((1, 1, 1)),
            fit_log_likelihood=0.0,
        )
        np.testing.assert_allclose(nll(model, np.zeros(1)), 0.5 * np.log(2 * np.pi), atol=1e-9)

    def test_duplicate_component_leaves_nll_unchanged(self):
        base = GmmModel(
            weights=np.array([1.0]),
            means=np.array([[0.5, -0.5]]),
            covariances=np.array([np.eye(2) * 1.3]),
            fit_log_likelihood=0.0,
        )
        doubled = GmmModel(
            weights=np.array([0.5, 0.5]),
            means=np.array([[0.5, -0.5], [0.5, -0.5]]),
            covariances=np.array([np.eye(2) * 1.3, np.eye(2) * 1.3]),
            fit_log_likelihood=0.0,
        )
        rng = np.random.default_rng(7)
        points = rng.standard_normal((50, 2))
        np.testing.assert_allclose(nll(base, points), nll(doubled, points), atol=1e-12)

    def test_matches_naive_direct_density_sum(self):
        rng = np.random.default_rng(8)
        h = 3
        model = GmmModel(
            weights=np.array([0.3, 0.7]),
            means=rng.standard_normal((2, h)),
            covariances=np.stack([np.eye(h) * 0.8, np.eye(h) * 1.4]),
            fit_log_likelihood=0.0,
        )
        points = rng.standard_normal((100, h))
        naive = []
        for x in points:
            total = 0.0
            for k in range(2):
                diff = x - model.means[k]
                cov = model.covariances[k]
                det = np.linalg.det(cov)
                maha = diff @ np.linalg.inv(cov) @ diff
                total += (
                    model.weights[k]
                    * np.exp(-0.5 * maha)
                    / np.sqrt(((2 * np.pi) ** h) * det)
                )
            naive.append(-np.log(total))
        np.testing.assert_allclose(nll(model, points), naive, atol=1e-10)

    def test_extreme_outlier_stays_finite(self):
        model = GmmModel(
            weights=np.array([1.0]),
            means=np.zeros((1, 2)),
            covariances=np.eye(2)[None],
            fit_log_likelihood=0.0,
        )
        value = nll(model, np.array([1e4, -1e4]))
        assert np.isfinite(value) and value > 1e7

    def test_density_integrates_to_one_in_1d(self):
        model = GmmModel(
            weights=np.array([0.4, 0.6]),
            means=np.array([[-1.0], [2.0]]),
            covariances=np.array([[[0.5]], [[1.5]]]),
            fit_log_likelihood=0.0,
        )
        grid = np.linspace(-15, 15, 20_001)[:, None]
        density = np.exp(log_density(model, grid))
        integral = np.trapezoid(density, grid[:, 0])
        np.testing.assert_allclose(integral, 1.0, atol=1e-3)


class TestSelectUnlabeled:
    def _model(self):
        return GmmModel(
            weights=np.array([1.0]),
            means=np.zeros((1, 2)),
            covariances=np.eye(2)[None],
            fit_log_likelihood=0.0,
        )

    def test_extreme_thresholds(self):
        rng = np.random.default_rng(9)
        latents = rng.standard_normal((40, 2))
        model = self._model()
        empty = select_unlabeled(model, latents, float("-inf"))
        assert empty.selected_unlabeled_ids == ()
        assert empty.fraction_unlabeled_selected == 0.0
        everything = select_unlabeled(model, latents, float("inf"))
        assert len(everything.selected_unlabeled_ids) == 40
        assert everything.fraction_unlabeled_selected == 1.0

    def test_selection_monotone_in_threshold(self):
        rng = np.random.default_rng(10)
        latents = rng.standard_normal((60, 2)) * 2
        model = self._model()
        previous = set()
        for threshold in np.linspace(1.5, 8.0, 12):
            report = select_unlabeled(model, latents, threshold)
            current = set(report.selected_unlabeled_ids)
            assert previous <= current
            previous = current

    def test_active_selection_has_lower_mean_nll_than_random(self):
        rng = np.random.default_rng(11)
        latents = np.concatenate(
            [rng.standard_normal((50, 2)), rng.standard_normal((50, 2)) + 6.0]
        )
        model = self._model()
        scores = nll(model, latents)
        threshold = float(np.median(scores))
        report = select_unlabeled(model, latents, threshold)
        n = len(report.selected_unlabeled_ids)
        active_mean = np.mean([scores[i] for i in report.selected_unlabeled_ids])
        random_mean = np.mean(rng.choice(scores, size=n, replace=False))
        assert active_mean <= random_mean

    def test_labeled_fraction_reported(self):
        rng = np.random.default_rng(12)
        model = self._model()
        labeled = rng.standard_normal((30, 2))
        unlabeled = rng.standard_normal((30, 2)) + 10.0
        report = select_unlabeled(model, unlabeled, 4.0, labeled_latents=labeled)
        assert report.fraction_labeled_below_threshold > report.fraction_unlabeled_selected


class TestPca:
    def test_collinear_data_explained_by_first_component(self):
        rng = np.random.default_rng(13)
        direction = np.array([1.0, -2.0, 0.5])
        data = rng.standard_normal((200, 1)) * direction
        result = pca_project(data, dims=2)
        assert result.explained_ratio[0] > 0.999

    def test_projection_preserves_distance_order_on_a_line(self):
        ts = np.array([0.0, 1.0, 2.5, 7.0])[:, None]
        data = ts * np.array([2.0, 1.0, -1.0])
        result = pca_project(data, dims=1)
        coords = result.projected[:, 0]
        gaps = np.abs(np.diff(coords))
        assert np.all(np.diff(gaps) > 0)  # spacing grows just like along ts

    def test_reconstruction_error_equals_discarded_eigenvalue_mass(self):
        rng = np.random.default_rng(14)
        data = rng.standard_normal((300, 5)) @ np.diag([3.0, 2.0, 1.0, 0.5, 0.1])
        dims = 2
        result = pca_project(data, dims=dims)
        centered = data - result.mean
        reconstructed = result.projected @ result.components
        residual = centered - reconstructed
        mean_sq_residual = float(np.mean(np.sum(residual**2, axis=1)))
        discarded = float(result.eigenvalues[dims:].sum())
        np.testing.assert_allclose(mean_sq_residual, discarded, atol=1e-8)
