import numpy as np
import pytest

from cranpool.errors import SingularMatrixError, UnsupportedModeError
from cranpool.metrics import (
    MODE_MULTIVARIATE,
    MODE_P2P,
    PRIVATE,
    SHARED,
    DesignPoint,
    backhaul_rate,
    evaluate_constraints,
    fronthaul_rate,
    lam_matrix,
    multivariate_joint_rate,
    phi_logdet,
    power_per_hz,
    privacy_leakage,
    rate_private,
    rate_shared,
)
from cranpool.model import NetworkConfig, other, sample_channels, selection_matrix

from conftest import random_point, random_psd, siso_config, unit_siso_channels

LOG2 = np.log2


def mimo_config(**kwargs):
    return NetworkConfig.symmetric(n_ues=2, n_ant_ru=2, n_ant_ue=2,
                                   snr_db=10.0, **kwargs).rescaled(1e6)


class TestPhiLogdet:
    def test_identity_pair(self):
        assert phi_logdet(np.eye(2), np.eye(2)) == pytest.approx(2.0, abs=1e-12)

    def test_zero_numerator(self, rng):
        for _ in range(5):
            b = random_psd(rng, 3) + 0.1 * np.eye(3)
            assert phi_logdet(np.zeros((3, 3)), b) == pytest.approx(0.0, abs=1e-12)

    def test_diag_case(self):
        assert phi_logdet(np.diag([3.0, 1.0]), np.eye(2)) == pytest.approx(3.0, abs=1e-12)

    def test_singular_denominator(self):
        with pytest.raises(SingularMatrixError):
            phi_logdet(np.eye(2), np.zeros((2, 2)))

    def test_asymmetric_rejected(self):
        bad = np.array([[1.0, 1.0], [0.0, 1.0]])
        with pytest.raises(ValueError):
            phi_logdet(bad, np.eye(2))

    def test_nonnegative_and_monotone(self, rng):
        # Phi >= 0 with equality iff A = 0; monotone in A in the Loewner order
        for _ in range(200):
            n = int(rng.integers(1, 4))
            b = random_psd(rng, n) + 0.05 * np.eye(n)
            a1 = random_psd(rng, n)
            bump = random_psd(rng, n)
            v1 = phi_logdet(a1, b)
            v2 = phi_logdet(a1 + bump, b)
            assert v1 >= -1e-12
            assert v2 >= v1 - 1e-10
        assert phi_logdet(np.zeros((2, 2)), np.eye(2)) == 0.0


class TestRatePrivate:
    def test_siso_unit(self):
        cfg = siso_config()
        ch = unit_siso_channels(cfg)
        p = DesignPoint.zeros(cfg)
        p.vtil[0][0] = np.array([[1.0 + 0j]])
        assert rate_private(0, 0, p, ch) == pytest.approx(1.0, abs=1e-12)

    def test_two_ues_interference(self):
        cfg = NetworkConfig.symmetric(n_ues=2, snr_db=10.0).rescaled(1e6)
        ch = unit_siso_channels(cfg)
        p = DesignPoint.zeros(cfg)
        for k in range(2):
            p.vtil[0][k] = np.array([[1.0 + 0j]])
        for k in range(2):
            assert rate_private(0, k, p, ch) == pytest.approx(LOG2(1.5), abs=1e-12)

    def test_matches_covariance_assembly_oracle(self, rng):
        # assemble the received covariance with/without the desired stream
        # directly from the signal model and compare the log-det ratio
        cfg = mimo_config()
        ch = sample_channels(cfg, 5)
        p = random_point(cfg, rng)
        for i in range(2):
            for k in range(cfg.n_ues):
                h = np.concatenate([ch.h[i][k][i][r] for r in range(cfg.n_rus)], axis=1)
                noise = np.eye(cfg.n_ant_ue[i][k], dtype=complex)
                for l in range(cfg.n_ues):
                    if l != k:
                        noise += h @ p.vtil[i][l] @ h.conj().T
                for r in range(cfg.n_rus):
                    hr = ch.h[i][k][i][r]
                    noise += hr @ p.omega_p[i][r] @ hr.conj().T
                total = noise + h @ p.vtil[i][k] @ h.conj().T
                want = (np.log2(np.linalg.det(total).real)
                        - np.log2(np.linalg.det(noise).real))
                got = rate_private(i, k, p, ch)
                assert got == pytest.approx(want, rel=1e-9)


class TestRateShared:
    def test_zero_precoders(self, rng):
        cfg = siso_config()
        ch = sample_channels(cfg, 1)
        p = DesignPoint.zeros(cfg, quant_floor=1e-3)
        assert rate_shared(0, 0, p, ch) == pytest.approx(0.0, abs=1e-12)

    def test_siso_symmetric_closed_form(self):
        # unit channels, each operator puts unit power on its own RU only;
        # cross-interference power 1, no quantization noise
        cfg = siso_config()
        ch = unit_siso_channels(cfg)
        p = DesignPoint.zeros(cfg)
        for i in range(2):
            p.util[i][0] = np.diag([1.0, 0.0]).astype(complex)
        for i in range(2):
            assert rate_shared(i, 0, p, ch) == pytest.approx(LOG2(1.5), abs=1e-12)

    def test_multivariate_zero_theta_equals_p2p(self, rng):
        cfg = siso_config()
        ch = sample_channels(cfg, 9)
        for _ in range(20):
            p = random_point(cfg, rng, multivariate=True)
            a = rate_shared(0, 0, p, ch, MODE_MULTIVARIATE)
            b = rate_shared(0, 0, p, ch, MODE_P2P)
            assert a == pytest.approx(b, rel=1e-12, abs=1e-12)

    def test_multivariate_requires_single_ru(self, rng):
        cfg = NetworkConfig.symmetric(n_rus=2, snr_db=10.0).rescaled(1e6)
        ch = sample_channels(cfg, 0)
        p = random_point(cfg, rng, multivariate=False)
        with pytest.raises(UnsupportedModeError):
            rate_shared(0, 0, p, ch, MODE_MULTIVARIATE)


class TestCompressionRates:
    def test_fronthaul_scalars(self):
        cfg = siso_config()
        p = DesignPoint.zeros(cfg)
        p.vtil[0][0] = np.array([[1.0 + 0j]])
        p.omega_p[0][0] = np.array([[1.0 + 0j]])
        assert fronthaul_rate(0, 0, PRIVATE, p, cfg) == pytest.approx(1.0, abs=1e-12)
        p.vtil[0][0] = np.array([[0.0 + 0j]])
        assert fronthaul_rate(0, 0, PRIVATE, p, cfg) == pytest.approx(0.0, abs=1e-12)
        p.vtil[0][0] = np.array([[3.0 + 0j]])
        assert fronthaul_rate(0, 0, PRIVATE, p, cfg) == pytest.approx(2.0, abs=1e-12)

    def test_fronthaul_shared_band_selects_own_block(self):
        cfg = siso_config()
        p = DesignPoint.zeros(cfg, quant_floor=1.0)
        p.util[0][0] = np.diag([3.0, 7.0]).astype(complex)
        # only the own-RU (top) block counts for the shared fronthaul stream
        assert fronthaul_rate(0, 0, SHARED, p, cfg) == pytest.approx(2.0, abs=1e-12)

    def test_backhaul_scalars(self):
        cfg = siso_config()
        p = DesignPoint.zeros(cfg)
        p.util[0][0] = np.diag([0.0, 1.0]).astype(complex)  # cross (T) part = 1
        p.sigma[1][0] = np.array([[1.0 + 0j]])
        assert backhaul_rate(0, 0, p, cfg) == pytest.approx(1.0, abs=1e-12)
        p.util[0][0] = np.zeros((2, 2), dtype=complex)
        assert backhaul_rate(0, 0, p, cfg) == pytest.approx(0.0, abs=1e-12)
        p.util[0][0] = np.diag([0.0, 1.0]).astype(complex)
        p.sigma[1][0] = np.array([[1.0 / 3.0 + 0j]])
        assert backhaul_rate(0, 0, p, cfg) == pytest.approx(2.0, abs=1e-12)

    def test_singular_quantization_block(self):
        cfg = siso_config()
        p = DesignPoint.zeros(cfg)  # omega = 0
        p.vtil[0][0] = np.array([[1.0 + 0j]])
        with pytest.raises(SingularMatrixError):
            fronthaul_rate(0, 0, PRIVATE, p, cfg)


class TestPrivacyLeakage:
    def test_zero_cross_precoder(self):
        cfg = siso_config()
        p = DesignPoint.zeros(cfg, quant_floor=1.0)
        assert privacy_leakage(0, 0, p, cfg) == pytest.approx(0.0, abs=1e-12)

    def test_scalar_single_ue(self):
        cfg = siso_config()
        p = DesignPoint.zeros(cfg)
        p.util[0][0] = np.diag([0.0, 1.0]).astype(complex)
        p.sigma[1][0] = np.array([[1.0 + 0j]])
        assert privacy_leakage(0, 0, p, cfg) == pytest.approx(1.0, abs=1e-12)

    def test_two_symmetric_ues(self):
        cfg = NetworkConfig.symmetric(n_ues=2, snr_db=10.0).rescaled(1e6)
        p = DesignPoint.zeros(cfg)
        for k in range(2):
            p.util[0][k] = np.diag([0.0, 1.0]).astype(complex)
        p.sigma[1][0] = np.array([[1.0 + 0j]])
        for k in range(2):
            assert privacy_leakage(0, k, p, cfg) == pytest.approx(LOG2(1.5), abs=1e-12)


class TestPower:
    def test_zero_point(self):
        cfg = siso_config()
        p = DesignPoint.zeros(cfg)
        assert power_per_hz(0, 0, PRIVATE, p, cfg) == 0.0
        assert power_per_hz(0, 0, SHARED, p, cfg) == 0.0

    def test_scalar_private(self):
        cfg = siso_config()
        p = DesignPoint.zeros(cfg)
        p.vtil[0][0] = np.array([[2.0 + 0j]])
        p.omega_p[0][0] = np.array([[0.5 + 0j]])
        assert power_per_hz(0, 0, PRIVATE, p, cfg) == pytest.approx(2.5, abs=1e-14)

    def test_matches_transmit_covariance_oracle(self, rng):
        # assemble RU (i,r)'s transmitted covariance from the signal model:
        # own shared precoders + incoming cross precoders + both quantization noises
        cfg = mimo_config()
        p = random_point(cfg, rng)
        for i in range(2):
            for r in range(cfg.n_rus):
                e = selection_matrix("E", i, r, cfg)
                cov = p.omega_s[i][r] + p.sigma[i][r]
                for k in range(cfg.n_ues):
                    et = selection_matrix("Etil", i, r, cfg)
                    cov = cov + et.T @ p.util[i][k] @ et
                    eb = selection_matrix("Ebar", other(i), r, cfg)
                    cov = cov + eb.T @ p.util[other(i)][k] @ eb
                want = np.trace(cov).real
                got = power_per_hz(i, r, SHARED, p, cfg)
                assert got == pytest.approx(want, rel=1e-12)

    def test_additivity_in_lifted_variables(self, rng):
        cfg = mimo_config()
        a = random_point(cfg, rng)
        b = random_point(cfg, rng)
        merged = a.copy()
        for i in range(2):
            for k in range(cfg.n_ues):
                merged.vtil[i][k] = a.vtil[i][k] + b.vtil[i][k]
                merged.util[i][k] = a.util[i][k] + b.util[i][k]
            for r in range(cfg.n_rus):
                merged.omega_p[i][r] = a.omega_p[i][r] + b.omega_p[i][r]
                merged.omega_s[i][r] = a.omega_s[i][r] + b.omega_s[i][r]
                merged.sigma[i][r] = a.sigma[i][r] + b.sigma[i][r]
        for band in (PRIVATE, SHARED):
            pa = power_per_hz(0, 0, band, a, cfg)
            pb = power_per_hz(0, 0, band, b, cfg)
            pm = power_per_hz(0, 0, band, merged, cfg)
            assert pm == pytest.approx(pa + pb, rel=1e-12)

    def test_unitary_refactor_invariance(self, rng):
        # functionals depend on the lifted covariance only, not on its factor
        cfg = siso_config()
        ch = sample_channels(cfg, 4)
        f = (rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)))
        q, _ = np.linalg.qr(rng.standard_normal((2, 2))
                            + 1j * rng.standard_normal((2, 2)))
        p1 = DesignPoint.zeros(cfg, quant_floor=1e-2)
        p2 = DesignPoint.zeros(cfg, quant_floor=1e-2)
        p1.util[0][0] = f @ f.conj().T
        p2.util[0][0] = (f @ q) @ (f @ q).conj().T
        assert rate_shared(0, 0, p1, ch) == pytest.approx(rate_shared(0, 0, p2, ch),
                                                          rel=1e-12)
        assert power_per_hz(0, 0, SHARED, p1, cfg) == pytest.approx(
            power_per_hz(0, 0, SHARED, p2, cfg), rel=1e-12)
        phase = np.exp(0.71j)
        p1.vtil[0][0] = np.array([[2.0 + 0j]])
        p2.vtil[0][0] = (phase * np.sqrt(2)) * np.conj(phase * np.sqrt(2)) \
            * np.ones((1, 1))
        assert rate_private(0, 0, p1, ch) == pytest.approx(
            rate_private(0, 0, p2, ch), rel=1e-12)


class TestMultivariateJointRate:
    def test_zero_theta_equals_marginal_sum(self, rng):
        cfg = siso_config()
        for _ in range(20):
            p = random_point(cfg, rng, multivariate=True)
            joint = multivariate_joint_rate(0, p, cfg)
            marg = (fronthaul_rate(0, 0, SHARED, p, cfg)
                    + backhaul_rate(0, 0, p, cfg))
            assert joint == pytest.approx(marg, rel=1e-12, abs=1e-12)

    def test_correlation_penalty_closed_form(self):
        cfg = siso_config()
        p = DesignPoint.zeros(cfg, multivariate=True)
        p.omega_s[0][0] = np.array([[1.0 + 0j]])
        p.sigma[1][0] = np.array([[1.0 + 0j]])
        p.theta[0] = np.array([[0.5 + 0j]])
        assert multivariate_joint_rate(0, p, cfg) == pytest.approx(-LOG2(0.75),
                                                                   abs=1e-12)

    def test_joint_at_least_marginal(self, rng):
        # Fischer inequality: det(Lambda) <= det(Omega) det(Sigma)
        cfg = siso_config()
        count = 0
        for _ in range(200):
            p = random_point(cfg, rng, multivariate=True, theta_scale=5e-4)
            lam = lam_matrix(0, p)
            if np.linalg.eigvalsh(lam).min() <= 0:
                continue
            count += 1
            joint = multivariate_joint_rate(0, p, cfg)
            marg = (fronthaul_rate(0, 0, SHARED, p, cfg)
                    + backhaul_rate(0, 0, p, cfg))
            assert joint >= marg - 1e-10
        assert count >= 150


class TestEvaluateConstraints:
    def test_zero_point_feasible(self):
        cfg = siso_config()
        ch = sample_channels(cfg, 2)
        p = DesignPoint.zeros(cfg, quant_floor=1e-6)
        report = evaluate_constraints(p, ch, cfg)
        assert report.is_feasible(tol=1e-9)
        assert report.objective == 0.0

    def test_targeted_violation(self):
        cfg = siso_config()
        ch = sample_channels(cfg, 2)
        p = DesignPoint.zeros(cfg, quant_floor=1e-6)
        p.rp[1][0] = 1.0  # above W * f = 0
        report = evaluate_constraints(p, ch, cfg)
        assert report.residuals["rate_private[1][0]"] > 0
        assert report.worst[0] == "rate_private[1][0]"
        others = {k: v for k, v in report.residuals.items() if k != "rate_private[1][0]"}
        assert all(v <= 1e-9 for v in others.values())

    def test_multivariate_rows_reduce_to_p2p(self, rng):
        cfg = siso_config()
        ch = sample_channels(cfg, 3)
        p = random_point(cfg, rng, multivariate=True)
        rep_mv = evaluate_constraints(p, ch, cfg, MODE_MULTIVARIATE)
        p2 = p.copy()
        p2.theta = None
        rep = evaluate_constraints(p2, ch, cfg, MODE_P2P)
        plain = [v for k, v in rep.residuals.items()
                 if k.startswith(("fronthaul", "backhaul"))]
        assert rep_mv.residuals["multivariate"] == pytest.approx(max(plain), abs=1e-9)
