import math

import mock
import numpy as np
import pytest
import yaml

from occsearch import (
    ConditioningError,
    DimensionMismatch,
    DuplicateInputs,
    InsufficientData,
    ValidationError,
)
from occsearch.surrogate import (
    Kernel,
    KernelParams,
    condition,
    fit,
    log_marginal_likelihood,
    posterior_mean_grad,
    predict,
    restart_thetas,
)


def matern(x, y, lengthscale, signal_variance):
    r = abs(x - y) / lengthscale
    s = math.sqrt(5.0) * r
    return signal_variance * (1 + s + s * s / 3.0) * math.exp(-s)


@pytest.fixture
def scattered():
    rng = np.random.default_rng(3)
    X = rng.uniform(size=(15, 3))
    y = np.sin(3 * X[:, 0]) + X[:, 1] ** 2 - 0.5 * X[:, 2]
    return X, y


def test_kernel_lookup_by_name():
    assert Kernel.get("matern52").name == "matern52"
    assert Kernel.get("squared_exponential").name == "squared_exponential"
    with pytest.raises(ValidationError):
        Kernel.get("rational_quadratic")


def test_kernel_params_round_trip_through_log_space():
    params = KernelParams([0.3, 2.0], 1.5, 1e-4)
    again = KernelParams.from_theta(params.theta)
    assert np.allclose(again.lengthscales, [0.3, 2.0])
    assert again.signal_variance == pytest.approx(1.5)
    assert again.noise_variance == pytest.approx(1e-4)


@pytest.mark.parametrize(
    "lengthscales, signal, noise",
    [([0.0], 1.0, 0.1), ([1.0], -1.0, 0.1), ([1.0], 1.0, -0.1)],
)
def test_kernel_params_reject_invalid_values(lengthscales, signal, noise):
    with pytest.raises(ValidationError):
        KernelParams(lengthscales, signal, noise)


def test_log_marginal_likelihood_single_zero_target():
    value = log_marginal_likelihood(
        KernelParams([1.0], 1.0, 0.0), [[0.5]], [0.0]
    )
    assert value == pytest.approx(-0.5 * math.log(2 * math.pi), abs=1e-12)


def test_log_marginal_likelihood_single_target_with_noise():
    value = log_marginal_likelihood(
        KernelParams([1.0], 1.0, 1.0), [[0.5]], [1.0]
    )
    expected = -0.25 - 0.5 * math.log(2) - 0.5 * math.log(2 * math.pi)
    assert value == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("kernel", ["matern52", "squared_exponential"])
def test_log_marginal_likelihood_gradient_matches_finite_differences(
    scattered, kernel
):
    X, y = scattered
    z = (y - y.mean()) / y.std()
    theta = np.log([0.4, 0.7, 1.2, 1.3, 1e-3])
    _, grad = log_marginal_likelihood(
        KernelParams.from_theta(theta), X, z, kernel, gradient=True
    )
    h = 1e-5
    numeric = np.empty_like(theta)
    for j in range(len(theta)):
        step = np.zeros_like(theta)
        step[j] = h
        up = log_marginal_likelihood(
            KernelParams.from_theta(theta + step), X, z, kernel
        )
        down = log_marginal_likelihood(
            KernelParams.from_theta(theta - step), X, z, kernel
        )
        numeric[j] = (up - down) / (2 * h)
    error = np.linalg.norm(numeric - grad) / np.linalg.norm(grad)
    assert error < 1e-4


def test_log_marginal_likelihood_checks_dimension(scattered):
    X, y = scattered
    with pytest.raises(DimensionMismatch):
        log_marginal_likelihood(KernelParams([1.0], 1.0, 0.1), X, y)


def test_cholesky_factor_reconstructs_kernel_matrix(scattered):
    X, y = scattered
    params = KernelParams([0.4, 0.7, 1.2], 1.3, 1e-3)
    model = condition(X, y, params)
    r2 = np.sum(((X[:, None, :] - X[None, :, :]) / params.lengthscales) ** 2, 2)
    k, _ = Kernel.get("matern52").profile(r2)
    K = 1.3 * k + (1e-3 + model.jitter) * np.eye(len(X))
    rebuilt = model.chol @ model.chol.T
    assert np.linalg.norm(rebuilt - K) / np.linalg.norm(K) < 1e-8


def test_noiseless_model_interpolates_training_data():
    X = np.linspace(0, 1, 20)[:, None]
    y = np.sin(2 * np.pi * X[:, 0])
    model = condition(X, y, KernelParams([0.2], 1.0, 1e-10))
    mean, _ = model.predict(X)
    assert np.max(np.abs(mean - y)) < 1e-6
    _, std = model.predict(X, standardized=True)
    assert np.max(std) <= math.sqrt(1e-10) + 1e-6


def test_two_point_posterior_matches_closed_form():
    X = np.array([[0.2], [0.6]])
    # Mean 0 and standard deviation 1 already.
    y = np.array([1.0, -1.0])
    ell, sf2, sn2 = 0.5, 1.5, 0.01
    model = condition(X, y, KernelParams([ell], sf2, sn2))

    a = sf2 + sn2
    b = matern(0.2, 0.6, ell, sf2)
    det = a * a - b * b
    for x in (0.0, 0.4, 0.55, 0.9):
        k1 = matern(x, 0.2, ell, sf2)
        k2 = matern(x, 0.6, ell, sf2)
        w1 = (a * k1 - b * k2) / det
        w2 = (a * k2 - b * k1) / det
        expected_mean = w1 * 1.0 + w2 * -1.0
        expected_var = sf2 - (k1 * w1 + k2 * w2)
        mean, std = predict(model, [x])
        assert mean == pytest.approx(expected_mean, abs=1e-8)
        assert std == pytest.approx(math.sqrt(expected_var), abs=1e-8)


def test_far_away_prediction_reverts_to_prior():
    X = np.array([[0.1], [0.5], [0.8]])
    y = np.array([2.0, 4.0, 9.0])
    model = condition(X, y, KernelParams([0.3], 2.0, 1e-4))
    mean, std = predict(model, [50.0])
    assert mean == pytest.approx(y.mean(), abs=1e-6)
    assert std == pytest.approx(math.sqrt(2.0) * y.std(), abs=1e-6)


def test_predictions_follow_affine_rescaling_of_targets(scattered):
    X, y = scattered
    params = KernelParams([0.4, 0.7, 1.2], 1.3, 1e-3)
    queries = np.random.default_rng(4).uniform(size=(30, 3))
    mean, std = condition(X, y, params).predict(queries)
    mean2, std2 = condition(X, 5 * y + 3, params).predict(queries)
    assert np.allclose(mean2, 5 * mean + 3, rtol=0, atol=1e-8)
    assert np.allclose(std2, 5 * std, rtol=0, atol=1e-8)


@pytest.mark.parametrize("kernel", ["matern52", "squared_exponential"])
def test_posterior_mean_gradient_matches_finite_differences(
    scattered, kernel
):
    X, y = scattered
    model = condition(X, y, KernelParams([0.3, 0.5, 0.4], 1.3, 1e-4), kernel)
    h = 1e-6
    for x in np.random.default_rng(5).uniform(size=(100, 3)):
        grad = posterior_mean_grad(model, x)
        numeric = np.empty(3)
        for j in range(3):
            step = np.zeros(3)
            step[j] = h
            numeric[j] = (
                predict(model, x + step)[0] - predict(model, x - step)[0]
            ) / (2 * h)
        error = np.linalg.norm(numeric - grad)
        assert error / max(np.linalg.norm(grad), 1e-8) < 1e-4


def test_gradient_of_symmetric_pair_points_along_the_data_axis():
    X = np.array([[0.3, 0.5], [0.7, 0.5]])
    model = condition(X, [-1.0, 1.0], KernelParams([0.3, 0.3], 1.0, 1e-6))
    grad = posterior_mean_grad(model, [0.5, 0.5])
    assert grad[0] > 0
    assert grad[1] == 0


def test_single_point_helpers_require_a_vector(scattered):
    X, y = scattered
    model = condition(X, y, KernelParams([0.4, 0.7, 1.2], 1.3, 1e-3))
    with pytest.raises(DimensionMismatch):
        predict(model, [[0.1, 0.2, 0.3]])
    with pytest.raises(DimensionMismatch):
        posterior_mean_grad(model, [[0.1, 0.2, 0.3]])
    with pytest.raises(DimensionMismatch):
        model.predict(np.zeros((4, 2)))


def test_constant_targets_give_a_constant_model():
    X = np.random.default_rng(0).uniform(size=(6, 2))
    model = fit(X, [4.2] * 6)
    assert model.constant
    assert np.all(model.targets == 0)
    mean, std = model.predict(np.random.default_rng(1).uniform(size=(5, 2)))
    assert np.all(mean == 4.2)
    assert np.all(std == 0)
    assert np.all(posterior_mean_grad(model, [0.3, 0.3]) == 0)


def test_fit_needs_two_points():
    with pytest.raises(InsufficientData):
        fit([[0.5]], [1.0])


def test_fit_rejects_duplicate_inputs():
    X = [[0.1, 0.2], [0.3, 0.4], [0.1, 0.2], [0.5, 0.5]]
    with pytest.raises(DuplicateInputs) as e:
        fit(X, [1.0, 2.0, 3.0, 4.0])
    assert e.value.rows == [0]


def test_fit_rejects_non_finite_targets():
    with pytest.raises(ValidationError):
        fit([[0.1], [0.2], [0.3]], [1.0, float("nan"), 2.0])


def test_factorization_failure_raises_conditioning_error(scattered):
    X, y = scattered
    with mock.patch(
        "scipy.linalg.cholesky", side_effect=np.linalg.LinAlgError
    ):
        with pytest.raises(ConditioningError):
            condition(X, y, KernelParams([0.4, 0.7, 1.2], 1.3, 1e-3))


def test_fit_is_deterministic_per_seed(scattered):
    X, y = scattered
    a = fit(X, y, restarts=4, rng=np.random.default_rng(11))
    b = fit(X, y, restarts=4, rng=np.random.default_rng(11))
    assert np.array_equal(a.params.theta, b.params.theta)
    assert np.array_equal(a.alpha, b.alpha)


def test_fit_beats_every_initial_guess(scattered):
    X, y = scattered
    model = fit(X, y, restarts=8, rng=np.random.default_rng(5))
    z = (y - y.mean()) / y.std()
    for theta in restart_thetas(3, 8, np.random.default_rng(5)):
        try:
            params = KernelParams.from_theta(theta)
            start = log_marginal_likelihood(params, X, z)
        except ConditioningError:
            continue
        assert model.log_likelihood >= start - 1e-9


def test_fit_learns_a_sine():
    X = np.linspace(0, 1, 20)[:, None]
    y = np.sin(2 * np.pi * X[:, 0])
    model = fit(X, y, rng=np.random.default_rng(0))
    queries = np.linspace(0.1, 0.9, 101)[:, None]
    mean, _ = model.predict(queries)
    rmse = math.sqrt(np.mean((mean - np.sin(2 * np.pi * queries[:, 0])) ** 2))
    assert rmse < 0.05


def test_dump_writes_hyperparameters_and_checksum(tmp_path, scattered):
    X, y = scattered
    model = condition(X, y, KernelParams([0.4, 0.7, 1.2], 1.3, 1e-3))
    model.dump(str(tmp_path / "a.yaml"))
    condition(X, y, KernelParams([0.4, 0.7, 1.2], 1.3, 1e-3)).dump(
        str(tmp_path / "b.yaml")
    )
    a = yaml.safe_load((tmp_path / "a.yaml").read_text())
    b = yaml.safe_load((tmp_path / "b.yaml").read_text())
    assert a["kernel"] == "matern52"
    assert a["n"] == 15
    assert a["dimension"] == 3
    assert a["params"]["lengthscales"] == [0.4, 0.7, 1.2]
    assert a["checksum"] == b["checksum"]
