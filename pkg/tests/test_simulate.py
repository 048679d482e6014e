import json
import math

import numpy as np
import pytest
from scipy import integrate

from mpspline import simulate
from mpspline.design import FunctionalDataset, gamma_n_seminorm_sq
from mpspline.exceptions import ConfigError, HarnessError
from mpspline.model import fit_functional
from mpspline.simulate import (
    MCReport,
    SimulationConfig,
    beta_eval,
    gen_curves,
    gen_errors,
    gen_responses,
    replication_rng,
    run_monte_carlo,
    run_replication,
    series_coefficients,
)


class ZeroRng:
    def standard_normal(self, size):
        return np.zeros(size)

    def uniform(self, lo, hi, size):
        return np.zeros(size)


class TestConfig:
    @pytest.mark.parametrize("bad", [
        {"process": "zigzag"}, {"beta_id": "b9"}, {"error": "cauchy"}, {"n": 5},
        {"grid_size": 10}, {"replications": 0}, {"phi_variant": "other"}, {"criterion": "bic"},
        {"beta_id": "custom"},
    ])
    def test_rejects(self, bad):
        with pytest.raises(ConfigError):
            SimulationConfig(**bad)

    def test_custom_beta(self):
        cfg = SimulationConfig(beta_id="custom", beta_values=np.zeros(100))
        assert len(cfg.beta_values) == 100

    def test_replace(self):
        assert SimulationConfig().replace(n=50).n == 50


class TestCurves:
    def test_zero_scores_give_zero_curves(self):
        for process in ("well_spaced", "closely_spaced"):
            d = gen_curves(SimulationConfig(process=process), ZeroRng(), n=3)
            assert np.all(d.curves == 0)

    def test_well_spaced_variance_at_midpoint(self):
        cfg = SimulationConfig(grid_size=101)
        d = gen_curves(cfg, np.random.default_rng(0), n=5000)
        j = np.arange(1, 51)
        expected = np.sum(series_coefficients("well_spaced") ** 2 * np.sin((j - 0.5) * np.pi / 2) ** 2)
        assert np.var(d.curves[:, 50]) == pytest.approx(expected, rel=0.05)

    def test_closely_spaced_coefficients(self):
        g = series_coefficients("closely_spaced")
        assert g[0] == 1.0
        assert g[1] == pytest.approx(-0.2 * (1 - 0.0002))
        assert g[4] == pytest.approx(0.2 * (5.0**-0.75))  # j = 5: sign +, j mod 5 = 0
        assert g[6] == pytest.approx(0.2 * (5.0**-0.75 - 0.0002))

    def test_uniform_scores_moments(self):
        z = np.random.default_rng(1).uniform(-math.sqrt(3), math.sqrt(3), 100_000)
        assert abs(z.mean()) < 0.02 and z.var() == pytest.approx(1.0, rel=0.02)

    def test_phi_variants(self):
        rng = np.random.default_rng(2)
        verbatim = gen_curves(SimulationConfig(process="closely_spaced"), rng, n=30)
        assert np.linalg.matrix_rank(verbatim.curves, tol=1e-9) == 2
        freq = gen_curves(SimulationConfig(process="closely_spaced", phi_variant="frequency_j"), rng, n=30)
        assert np.linalg.matrix_rank(freq.curves, tol=1e-9) > 10


class TestBetaAndErrors:
    def test_beta_values(self):
        assert beta_eval("b1", 0.5) == pytest.approx(-1.0)
        assert beta_eval("b3", 0.5) == 0.5
        assert beta_eval("b4", 0.5) == pytest.approx(1 / 0.6 + 8)
        dens = lambda x, m, s: math.exp(-0.5 * ((x - m) / s) ** 2) / (s * math.sqrt(2 * math.pi))
        x = 0.3
        assert beta_eval("b2", x) == pytest.approx(-dens(x, 0.2, 0.03) + 3 * dens(x, 0.5, 0.4) + dens(x, 0.75, 0.05))

    def test_error_laws(self):
        rng = np.random.default_rng(3)
        assert abs(gen_errors("gaussian", 10**6, rng).mean()) < 0.005
        assert gen_errors("mix_gaussian", 10**6, rng).mean() == pytest.approx(1.0, abs=0.02)
        assert abs(np.median(gen_errors("slash", 10**6, rng))) < 0.01
        t3 = gen_errors("t3", 10**6, rng)
        assert np.var(t3) == pytest.approx(3.0, rel=0.2)

    def test_mixture_components(self):
        e = gen_errors("mix_gaussian", 200_000, np.random.default_rng(4))
        hi = e[e > 5]
        assert hi.size / e.size == pytest.approx(0.1, abs=0.005)
        assert hi.mean() == pytest.approx(10.0, abs=0.05)


class TestResponses:
    def test_zero_curves_give_pure_noise(self):
        d = FunctionalDataset(np.linspace(0, 1, 50), np.zeros((20, 50)))
        out = gen_responses(d, "b1", "gaussian", np.random.default_rng(5))
        np.testing.assert_array_equal(out.responses, np.random.default_rng(5).standard_normal(20))

    def test_constant_curve_integrates_cosine_to_zero(self):
        d = FunctionalDataset(np.linspace(0, 1, 100), np.ones((2, 100)))
        np.testing.assert_allclose(gen_responses(d, "b1", None).responses, 0.0, atol=1e-12)

    def test_linear_curve_against_quadrature(self):
        g = np.linspace(0, 1, 100)
        d = FunctionalDataset(g, g[None, :])
        ref = integrate.quad(lambda t: t * beta_eval("b3", t), 0, 1)[0]
        assert gen_responses(d, "b3", None).responses[0] == pytest.approx(ref, abs=1e-4)


SMALL = SimulationConfig(n=40, grid_size=40, basis_dim=12, replications=3, seed=7)


class TestMonteCarlo:
    def test_single_replication_equals_direct_fit(self):
        cfg = SMALL.replace(replications=1)
        rep = run_monte_carlo(cfg)
        rng = replication_rng(cfg.seed, 0)
        data = gen_responses(gen_curves(cfg, rng), "b1", "gaussian", rng)
        model = fit_functional(data, basis_dim=12, rng=rng)
        assert rep.mse[0] == gamma_n_seminorm_sq(data, model.beta(data.grid) - beta_eval("b1", data.grid))

    def test_deterministic_and_schedule_independent(self):
        a = run_monte_carlo(SMALL)
        b = run_monte_carlo(SMALL)
        c = run_monte_carlo(SMALL, n_jobs=2)
        assert a == b == c
        assert a.to_json() == c.to_json()

    def test_aggregates(self):
        rep = run_monte_carlo(SMALL)
        assert rep.mean_mse == float(np.mean(rep.mse))
        assert rep.median_mse == float(np.median(rep.mse))
        doc = json.loads(rep.to_json())
        assert [r["mse"] for r in doc["per_replication"]] == list(rep.mse)
        lines = rep.to_csv().strip().splitlines()
        assert lines[0] == "index,mse,lambda,edf" and len(lines) == 4

    def test_failure_policy(self, monkeypatch):
        real = simulate.run_replication

        def flaky(config, index):
            if index == 0:
                return {"index": 0, "mse": math.nan, "lam": math.nan, "edf": math.nan, "error": "boom"}
            return real(config, index)

        monkeypatch.setattr(simulate, "run_replication", flaky)
        with pytest.raises(HarnessError):
            run_monte_carlo(SMALL)
        rep = run_monte_carlo(SMALL.replace(replications=3), max_failure_rate=0.5)
        assert rep.failures == ((0, "boom"),) and rep.indices == (1, 2)

    def test_run_replication_fields(self):
        row = run_replication(SMALL, 1)
        assert row["error"] is None and row["mse"] >= 0 and row["lam"] > 0

    def test_closely_spaced_runs(self):
        rep = run_monte_carlo(SMALL.replace(process="closely_spaced", beta_id="b3"))
        assert rep.n_failed == 0 and all(np.isfinite(rep.mse))

    def test_report_type(self):
        assert isinstance(run_monte_carlo(SMALL.replace(replications=1)), MCReport)
