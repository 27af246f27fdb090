from __future__ import annotations

import numpy as np
import pytest

from mediboot.errors import DegenerateDesignError, InputError, SampleTooSmallError
from mediboot.model import (
    BatchFit,
    Dataset,
    demean,
    fit_batch,
    fit_mediation,
    jackknife,
    jackknife_se_batch,
    sobel_se,
)
from mediboot.rng import RngStream

from conftest import make_dataset, noiseless_dataset

# Exact values for the fixed 6-point dataset below, computed independently
# with rational arithmetic through the normal equations.
ORACLE_6PT = dict(
    theta_x=0.7142857142857143,
    beta_x=0.85,
    beta_m=0.25,
    gamma=0.17857142857142858,
    s_v2=1.5714285714285714,
    s_u2=0.5166666666666667,
    se_theta=0.14982983545287878,
    se_beta_m=0.2867001389901472,
    sobel=0.20818331023816303,
)


def six_point():
    return Dataset(
        np.array([-5.0, -3, -1, 1, 3, 5]),
        np.array([-4.0, -1, -2, 2, 1, 4]),
        np.array([-6.0, -2, -1, 1, 3, 5]),
        demeaned=True,
    )


class TestDataset:
    def test_length_mismatch(self):
        with pytest.raises(InputError):
            Dataset(np.zeros(5), np.zeros(6), np.zeros(5))

    def test_too_small(self):
        with pytest.raises(SampleTooSmallError):
            Dataset(np.zeros(4), np.zeros(4), np.zeros(4))

    def test_demeaned_flag_checked(self):
        with pytest.raises(InputError):
            Dataset(np.ones(5), np.zeros(5), np.zeros(5), demeaned=True)


class TestDemean:
    def test_arithmetic(self):
        d = Dataset(np.array([1.0, 2, 3, 4, 5]), np.zeros(5), np.zeros(5))
        out = demean(d)
        np.testing.assert_allclose(out.x, [-2, -1, 0, 1, 2])
        assert out.demeaned

    def test_idempotent(self):
        d = make_dataset(seed=1)
        out = demean(d)
        np.testing.assert_allclose(out.x, d.x, atol=1e-14)
        np.testing.assert_allclose(out.m, d.m, atol=1e-14)

    def test_means_vanish(self):
        d = demean(make_dataset(seed=2, demeaned=False))
        for v in (d.x, d.m, d.y):
            assert abs(v.mean()) < 1e-12


class TestFitMediation:
    def test_noiseless_outcome(self):
        # y is exact in (x, m); the v disturbance keeps the design regular
        fit = fit_mediation(noiseless_dataset())
        assert fit.theta_x_hat == pytest.approx(0.5, abs=1e-12)
        assert fit.beta_m_hat == pytest.approx(0.3, abs=1e-12)
        assert fit.gamma_hat == pytest.approx(0.15, abs=1e-12)
        assert fit.s_u2 == pytest.approx(0.0, abs=1e-20)

    def test_fully_noiseless_is_singular(self):
        # with v = 0 the mediator is collinear with x and beta_x/beta_m are
        # not separately identified
        x = np.arange(8.0) - 3.5
        with pytest.raises(DegenerateDesignError):
            fit_mediation(Dataset(x, 0.5 * x, 0.2 * x + 0.15 * x, demeaned=True))

    def test_against_rational_oracle(self):
        fit = fit_mediation(six_point())
        assert fit.theta_x_hat == pytest.approx(ORACLE_6PT["theta_x"], abs=1e-10)
        assert fit.beta_x_hat == pytest.approx(ORACLE_6PT["beta_x"], abs=1e-10)
        assert fit.beta_m_hat == pytest.approx(ORACLE_6PT["beta_m"], abs=1e-10)
        assert fit.gamma_hat == pytest.approx(ORACLE_6PT["gamma"], abs=1e-10)
        assert fit.s_v2 == pytest.approx(ORACLE_6PT["s_v2"], abs=1e-10)
        assert fit.s_u2 == pytest.approx(ORACLE_6PT["s_u2"], abs=1e-10)
        assert fit.se_theta_x == pytest.approx(ORACLE_6PT["se_theta"], abs=1e-10)
        assert fit.se_beta_m == pytest.approx(ORACLE_6PT["se_beta_m"], abs=1e-10)

    def test_gamma_is_product(self, dataset):
        fit = fit_mediation(dataset)
        assert fit.gamma_hat == fit.theta_x_hat * fit.beta_m_hat

    def test_orthogonality(self, dataset):
        fit = fit_mediation(dataset)
        scale = np.sqrt(dataset.x @ dataset.x)
        assert abs(dataset.x @ fit.v_hat) < 1e-8 * scale * np.linalg.norm(fit.v_hat)
        assert abs(dataset.x @ fit.u_hat) < 1e-8 * scale * max(np.linalg.norm(fit.u_hat), 1)
        assert abs(dataset.m @ fit.u_hat) < 1e-8 * np.linalg.norm(dataset.m) * max(
            np.linalg.norm(fit.u_hat), 1
        )

    def test_requires_demeaned(self):
        with pytest.raises(InputError):
            fit_mediation(make_dataset(demeaned=False))

    def test_collinear_mediator(self):
        x = np.array([-2.0, -1, 0, 1, 2])
        with pytest.raises(DegenerateDesignError):
            fit_mediation(Dataset(x, 2 * x, x.copy(), demeaned=True))

    def test_mean_unbiased(self):
        # E[gamma_hat | x] = gamma; check over many simulated fits
        n, theta, beta = 50, 0.39, 0.39
        gen = RngStream(5).generator()
        x = gen.standard_normal(n)
        x = (x - x.mean()) / np.sqrt((x @ x - x.sum() ** 2 / n) / (n - 1))
        R = 100_000
        v = gen.standard_normal((R, n))
        u = gen.standard_normal((R, n))
        m = theta * x + v
        y = beta * m + u
        batch = fit_batch(np.broadcast_to(x, (R, n)).copy(), m, y)
        se = batch.gamma.std(ddof=1) / np.sqrt(R)
        assert abs(batch.gamma.mean() - theta * beta) < 3 * se

    def test_scale_equivariance(self, dataset):
        c = 3.7
        fit = fit_mediation(dataset)
        fit_c = fit_mediation(Dataset(dataset.x, dataset.m, c * dataset.y, demeaned=True))
        assert fit_c.beta_m_hat == pytest.approx(c * fit.beta_m_hat, rel=1e-10)
        assert fit_c.gamma_hat == pytest.approx(c * fit.gamma_hat, rel=1e-10)
        assert sobel_se(fit_c) == pytest.approx(c * sobel_se(fit), rel=1e-10)
        jc, j = jackknife(Dataset(dataset.x, dataset.m, c * dataset.y, demeaned=True)), jackknife(dataset)
        assert jc.se_jack == pytest.approx(c * j.se_jack, rel=1e-8)
        assert jc.accel == pytest.approx(j.accel, abs=1e-10)


def _synthetic_fit(theta, beta_m, se_theta, se_beta):
    from mediboot.model import MediationFit

    return MediationFit(
        theta_x_hat=theta, beta_x_hat=0.0, beta_m_hat=beta_m,
        gamma_hat=theta * beta_m, s_v2=1.0, s_u2=1.0,
        se_theta_x=se_theta, se_beta_m=se_beta,
        v_hat=np.zeros(6), u_hat=np.zeros(6), xtx=1.0, n=6, df_v=4, df_u=3,
    )


class TestSobel:
    def test_zero_case(self):
        assert sobel_se(_synthetic_fit(0.0, 0.0, 0.5, 0.2)) == 0.0

    def test_single_term(self):
        assert sobel_se(_synthetic_fit(1.0, 0.0, 0.5, 0.2)) == pytest.approx(0.2, abs=1e-15)

    def test_recompute_from_fields(self):
        fit = fit_mediation(six_point())
        ref = np.sqrt(
            fit.theta_x_hat**2 * fit.se_beta_m**2 + fit.beta_m_hat**2 * fit.se_theta_x**2
        )
        assert sobel_se(fit) == pytest.approx(ref, abs=1e-12)
        assert sobel_se(fit) == pytest.approx(ORACLE_6PT["sobel"], abs=1e-10)


class TestJackknife:
    def test_noiseless_degenerate(self):
        # beta_m = 0 with exact outcome: every leave-one-out gamma is 0
        out = jackknife(noiseless_dataset(beta_m=0.0))
        assert out.degenerate
        assert out.accel == 0.0
        assert out.se_jack == pytest.approx(0.0, abs=1e-12)

    def test_symmetric_loo_zero_accel(self):
        from mediboot.model import JackknifeSummary  # noqa: F401  (type of result below)
        d = make_dataset(n=12, seed=21)
        out = jackknife(d)
        # direct check of the accel formula on the symmetric +-c pattern
        dev = np.tile([-0.3, 0.3], 6)
        assert float((dev**3).sum()) / (6.0 * float((dev**2).sum()) ** 1.5) == 0.0
        assert np.isfinite(out.accel)

    def test_matches_brute_force_refits(self):
        d = make_dataset(n=10, seed=3)
        out = jackknife(d)
        for i in range(d.n):
            keep = np.arange(d.n) != i
            sub = demean(Dataset(d.x[keep], d.m[keep], d.y[keep]))
            ref = fit_mediation(sub).gamma_hat
            assert out.leave_one_out[i] == pytest.approx(ref, rel=1e-9, abs=1e-12)
        assert out.mean_loo == pytest.approx(out.leave_one_out.mean(), abs=1e-14)

    def test_min_size(self):
        d = make_dataset(n=5)
        with pytest.raises(SampleTooSmallError):
            jackknife(d)


class TestBatchKernels:
    def test_fit_batch_matches_scalar(self):
        gen = RngStream(7).generator()
        x = gen.standard_normal((20, 30))
        m = gen.standard_normal((20, 30))
        y = gen.standard_normal((20, 30))
        batch = fit_batch(x, m, y)
        for i in range(20):
            fit = fit_mediation(demean(Dataset(x[i], m[i], y[i])))
            assert batch.theta[i] == pytest.approx(fit.theta_x_hat, rel=1e-10)
            assert batch.beta_m[i] == pytest.approx(fit.beta_m_hat, rel=1e-10)
            assert batch.gamma[i] == pytest.approx(fit.gamma_hat, rel=1e-10)
            assert batch.ssv[i] == pytest.approx(fit.v_hat @ fit.v_hat, rel=1e-8)
            assert batch.ssu[i] == pytest.approx(fit.u_hat @ fit.u_hat, rel=1e-8)

    def test_singular_rows_flagged(self):
        x = np.linspace(-1, 1, 8)
        batch = fit_batch(x[None, :], (2 * x)[None, :], x[None, :])
        assert batch.singular[0]

    def test_jackknife_se_batch_matches_scalar(self):
        d = make_dataset(n=25, seed=9)
        batch = fit_batch(d.x[None, :], d.m[None, :], d.y[None, :], keep_data=True)
        se = jackknife_se_batch(batch)
        assert se[0] == pytest.approx(jackknife(d).se_jack, rel=1e-9)

    def test_sobel_se_batch_matches_scalar(self):
        d = make_dataset(n=25, seed=10)
        batch = fit_batch(d.x[None, :], d.m[None, :], d.y[None, :])
        fit = fit_mediation(d)
        assert batch.sobel_se(d.n - 2, d.n - 3)[0] == pytest.approx(sobel_se(fit), rel=1e-10)
