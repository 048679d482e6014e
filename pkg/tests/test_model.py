import json

import numpy as np
import pytest

from helpers import instance
from mpspline.basis import basis_of_dimension
from mpspline.design import FunctionalDataset, spline_design
from mpspline.exceptions import GridMismatchError
from mpspline.model import FittedModel, fit_functional
from mpspline.robust import mad_scale


@pytest.fixture(scope="module")
def huber_model():
    _, _, data = instance(21, n=80, outliers=0.1)
    return data, fit_functional(data, "huber", basis_dim=12, rng=0)


def spline_data(seed, n=60, k=101, dim=8):
    """Noise-free responses from a coefficient function inside the basis span."""
    rng = np.random.default_rng(seed)
    grid = np.linspace(0, 1, k)
    freqs = np.arange(1, 11)
    curves = rng.standard_normal((n, 20)) @ np.vstack([np.sin(np.pi * freqs[:, None] * grid),
                                                        np.cos(np.pi * freqs[:, None] * grid)])
    basis = basis_of_dimension(dim)
    coef = rng.standard_normal(dim)
    data = FunctionalDataset(grid, curves)
    y = 0.7 + spline_design(data, basis) @ coef
    return data.with_responses(y), basis, coef


class TestFit:
    def test_default_criteria(self, huber_model):
        data, model = huber_model
        assert model.criterion == "aicc"
        assert fit_functional(data, "square", basis_dim=12).criterion == "gcv"

    def test_fixed_lambda_skips_selection(self):
        _, _, data = instance(22)
        model = fit_functional(data, "huber", basis_dim=12, lam=1e-3, rng=0)
        assert model.lam == 1e-3 and model.criterion is None and model.selection is None

    def test_noise_free_recovery(self):
        data, basis, coef = spline_data(0)
        model = fit_functional(data, "square", basis_dim=basis.dimension, lam=1e-12)
        t = np.linspace(0, 1, 200)
        np.testing.assert_allclose(model.beta(t), basis(coef, t), atol=1e-4)
        assert model.intercept == pytest.approx(0.7, abs=1e-6)

    def test_square_diagnostic_scale_is_mad(self):
        _, _, data = instance(23)
        model = fit_functional(data, "square", basis_dim=12)
        assert model.fit.sigma.method == "fixed"
        assert model.diagnostic_scale == mad_scale(model.fit.residuals)
        np.testing.assert_array_equal(model.standardized_residuals(), model.fit.residuals / model.diagnostic_scale)

    def test_flags_shifted_responses(self, huber_model):
        _, model = huber_model
        flagged = np.abs(model.standardized_residuals()) > 2.5
        assert flagged[:8].mean() >= 0.9

    def test_bad_loss(self):
        _, _, data = instance(24)
        with pytest.raises(ValueError):
            fit_functional(data, "cauchy")
        with pytest.raises(ValueError):
            fit_functional(FunctionalDataset(data.grid, data.curves), "huber")


class TestPredict:
    def test_training_predictions_equal_fitted(self, huber_model):
        data, model = huber_model
        np.testing.assert_allclose(model.predict(data), data.responses - model.fit.residuals, atol=1e-10)

    def test_zero_curve(self, huber_model):
        data, model = huber_model
        zero = FunctionalDataset(data.grid, np.zeros((2, data.k)))
        np.testing.assert_array_equal(model.predict(zero), model.intercept)

    def test_grid_mismatch(self, huber_model):
        data, model = huber_model
        with pytest.raises(GridMismatchError):
            model.predict(FunctionalDataset(np.linspace(0, 1, data.k + 1), np.ones((1, data.k + 1))))

    def test_centered_fit(self):
        _, _, data = instance(25, n=60)
        model = fit_functional(data, "huber", basis_dim=12, center=True, rng=0)
        np.testing.assert_allclose(model.predict(data), data.responses - model.fit.residuals, atol=1e-10)
        # the mean curve predicts the intercept
        mean = FunctionalDataset(data.grid, data.curves.mean(axis=0, keepdims=True))
        assert model.predict(mean)[0] == pytest.approx(model.intercept, abs=1e-12)


class TestSerialization:
    def test_round_trip_through_json(self, huber_model):
        data, model = huber_model
        back = FittedModel.from_dict(json.loads(json.dumps(model.to_dict())))
        np.testing.assert_array_equal(back.predict(data), model.predict(data))
        assert back.lam == model.lam and back.q == model.q and back.basis == model.basis
        assert back.fit.sigma.sigma == model.fit.sigma.sigma
        assert back.fit.loss == model.fit.loss

    def test_centered_round_trip(self):
        _, _, data = instance(26)
        model = fit_functional(data, "square", basis_dim=10, center=True)
        back = FittedModel.from_dict(json.loads(json.dumps(model.to_dict())))
        np.testing.assert_array_equal(back.predict(data), model.predict(data))

    def test_required_fields(self, huber_model):
        d = huber_model[1].to_dict()
        for key in ("format_version", "alpha", "coefficients", "knots", "order", "penalty_order",
                    "lambda", "sigma", "edf", "converged", "iterations"):
            assert key in d

    def test_version_check(self, huber_model):
        d = huber_model[1].to_dict()
        d["format_version"] = 99
        with pytest.raises(ValueError, match="format_version"):
            FittedModel.from_dict(d)

    def test_coefficient_count_check(self, huber_model):
        d = huber_model[1].to_dict()
        d["coefficients"] = d["coefficients"][:-1]
        with pytest.raises(ValueError):
            FittedModel.from_dict(d)
