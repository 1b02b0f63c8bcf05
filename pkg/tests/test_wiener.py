import numpy as np
import pytest

from modelbench.errors import DomainError, SingularFilterError
from modelbench.signal1d import CirculantSpec, SignalModel1D, generate_dataset, identity, make_blur
from modelbench.wiener import (
    analytic_ese,
    apply,
    build_wiener,
    build_wiener_dense,
    dft_matrix,
    empirical_mse,
    linear_ese,
    squared_errors,
    standard_error,
)


def test_noiseless_identity_channel():
    m = SignalModel1D(8, 0.9, identity(8), 0.0)
    np.testing.assert_allclose(build_wiener(m).W.dense(), np.eye(8), atol=1e-12)
    assert analytic_ese(m) == pytest.approx(0.0, abs=1e-12)


def test_scalar_shrinkage():
    sigma = 0.3
    m = SignalModel1D(8, 1e-300, identity(8), sigma)
    np.testing.assert_allclose(build_wiener(m).W.dense(), np.eye(8) / (1 + sigma**2), atol=1e-12)


def test_scalar_mmse():
    r, s = 2.5, 0.7
    m = SignalModel1D(1, 0.5, CirculantSpec([1.0]), s, signal_var=r)
    assert analytic_ese(m) == pytest.approx(r * s**2 / (r + s**2), rel=1e-12)


@pytest.mark.parametrize("D", [2, 4, 8, 32])
def test_dense_matches_frequency(D):
    H = make_blur(D, normalize=True) if D >= 3 else CirculantSpec([0.7, 0.3])
    m = SignalModel1D(D, 0.8, H, 0.2)
    filt = build_wiener(m)
    np.testing.assert_allclose(filt.W.dense(), build_wiener_dense(m), atol=1e-8)
    x = np.random.default_rng(D).standard_normal((5, D))
    np.testing.assert_allclose(apply(filt, x), x @ build_wiener_dense(m).T, atol=1e-8)


def test_apply_linearity(model):
    filt = build_wiener(model)
    np.testing.assert_array_equal(apply(filt, np.zeros(32)), np.zeros(32))
    ident = build_wiener(SignalModel1D(32, 0.5, identity(32), 0.0))
    x = np.random.default_rng(0).standard_normal(32)
    np.testing.assert_allclose(apply(ident, x), x, atol=1e-12)
    with pytest.raises(DomainError):
        apply(filt, np.zeros(31))


@pytest.mark.parametrize("D", [2, 8, 32])
def test_dft_unitary(D):
    F = dft_matrix(D)
    np.testing.assert_allclose(F @ F.conj().T, np.eye(D), atol=1e-10)


def test_dft_diagonalises_circulant(model):
    F = dft_matrix(32)
    M = F @ model.R_phi.dense() @ F.conj().T
    assert np.abs(M - np.diag(np.diag(M))).max() < 1e-10


def test_singular_denominator():
    H = CirculantSpec([0.5, 0.5])  # zero response at the Nyquist frequency
    m = SignalModel1D(2, 1e-300, H, 0.0)
    with pytest.raises(SingularFilterError) as err:
        build_wiener(m)
    assert err.value.frequency == 1


def test_default_model_value(model):
    assert analytic_ese(model) == pytest.approx(1.743, abs=0.005)


def test_unnormalized_reading_differs():
    literal = SignalModel1D(32, 0.95, make_blur(32), 0.1)
    assert analytic_ese(literal) == pytest.approx(0.3038, abs=1e-3)


def test_analytic_matches_monte_carlo_dense_oracle(model):
    # dense-matrix estimator on fresh samples, no spectral code on the estimator side
    W = build_wiener_dense(model)
    ds = generate_dataset(model, 100_000, 11, "mc")
    err = np.sum((ds.phi_data @ W.T - ds.phi) ** 2, axis=1)
    assert abs(err.mean() - analytic_ese(model)) <= 0.02


def test_empirical_mse_contract(model):
    ds = generate_dataset(model, 100_000, 12, "mc")
    small = generate_dataset(model, 50, 12, "small")
    truth = {x.tobytes(): p for x, p in zip(small.phi_data, small.phi)}
    assert empirical_mse(lambda x: truth[x.tobytes()], small, vectorized=False) == 0.0
    assert abs(empirical_mse(lambda x: np.zeros_like(x), ds) - 32.0) < 0.5
    assert abs(empirical_mse(build_wiener(model), ds) - 1.743) < 0.02
    with pytest.raises(DomainError):
        empirical_mse(lambda x: x, [])


def test_linear_ese_matches_monte_carlo(model):
    M = CirculantSpec(np.random.default_rng(3).normal(0, 0.3, 32))
    ds = generate_dataset(model, 50_000, 13, "mc")
    err = squared_errors(lambda x: x @ M.dense().T, ds)
    assert abs(err.mean() - linear_ese(model, M)) < 4 * standard_error(err)


def test_wiener_is_optimal_among_random_linear(model):
    ese = analytic_ese(model)
    ds = generate_dataset(model, 100_000, 14, "mc")
    rng = np.random.default_rng(5)
    W = build_wiener(model).W.first_row
    for i in range(20):
        M = CirculantSpec(W + rng.normal(0, 0.05 * (i + 1) / 20, 32))
        err = squared_errors(lambda x: x @ M.dense().T, ds)
        assert err.mean() >= ese - 3 * standard_error(err)
        assert linear_ese(model, M) >= ese - 1e-12
