"""Exact covariance-domain evaluation of all performance functionals.

Everything here is written against the lifted variables: private precoder
covariances ``vtil[i][k]``, stacked shared covariances ``util[i][k]`` (own-RU
part on top, cross-RU part below), fronthaul quantization covariances
``omega_p`` / ``omega_s``, backhaul quantization covariances ``sigma`` and, in
multivariate mode, the cross-covariances ``theta``.  Rates are
``log2 det`` ratios of these covariances propagated through the channel; no
signal-level simulation happens anywhere.

Functions return per-Hz spectral quantities (bit/s/Hz); multiplying by the
subband bandwidths yields bit/s in whatever unit family the config uses.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .errors import DimensionError, SingularMatrixError, UnsupportedModeError
from .model import ChannelRealization, NetworkConfig, other, selection_matrix

LN2 = float(np.log(2.0))

MODE_P2P = "pointToPoint"
MODE_MULTIVARIATE = "multivariate"

PRIVATE = "private"
SHARED = "shared"

_HERM_TOL = 1e-9


@dataclass
class DesignPoint:
    """Lifted optimization variables for one scenario.

    ``sigma[i][r]`` is the covariance of the quantization noise that the other
    CP adds onto the cross-precoded signal destined for RU (i, r).
    ``theta[i]`` (multivariate mode only, single RU per operator) correlates
    CP i's own fronthaul noise with the backhaul noise it adds for the other
    operator's RU.
    """

    vtil: list            # [i][k] -> (n_{R,i}, n_{R,i}) hermitian PSD
    util: list            # [i][k] -> (n_{R,i}+n_{R,ibar}, ...) hermitian PSD
    omega_p: list         # [i][r] -> (n_{R,i,r}, n_{R,i,r})
    omega_s: list         # [i][r]
    sigma: list           # [i][r]
    wp: list              # [i] -> Hz
    ws: float             # Hz
    rp: list              # [i][k] -> bit/s
    rs: list              # [i][k] -> bit/s
    theta: list | None = None   # [i] -> (n_{R,i,1}, n_{R,ibar,1}) or None

    @classmethod
    def zeros(cls, config: NetworkConfig, quant_floor: float = 0.0,
              multivariate: bool = False) -> "DesignPoint":
        """All-zero precoders with ``quant_floor * I`` quantization blocks."""
        def per_ru(i):
            return [quant_floor * np.eye(config.n_ant_ru[i][r], dtype=complex)
                    for r in range(config.n_rus)]

        vtil = [[np.zeros((config.n_ant_op(i),) * 2, dtype=complex)
                 for _ in range(config.n_ues)] for i in range(2)]
        util = [[np.zeros((config.stacked_dim(i),) * 2, dtype=complex)
                 for _ in range(config.n_ues)] for i in range(2)]
        theta = None
        if multivariate:
            theta = [np.zeros((config.n_ant_ru[i][0], config.n_ant_ru[other(i)][0]),
                              dtype=complex) for i in range(2)]
        return cls(vtil=vtil, util=util,
                   omega_p=[per_ru(0), per_ru(1)], omega_s=[per_ru(0), per_ru(1)],
                   sigma=[per_ru(0), per_ru(1)],
                   wp=[config.total_bandwidth / 3] * 2, ws=config.total_bandwidth / 3,
                   rp=[[0.0] * config.n_ues for _ in range(2)],
                   rs=[[0.0] * config.n_ues for _ in range(2)],
                   theta=theta)

    def copy(self) -> "DesignPoint":
        return DesignPoint(
            vtil=[[m.copy() for m in row] for row in self.vtil],
            util=[[m.copy() for m in row] for row in self.util],
            omega_p=[[m.copy() for m in row] for row in self.omega_p],
            omega_s=[[m.copy() for m in row] for row in self.omega_s],
            sigma=[[m.copy() for m in row] for row in self.sigma],
            wp=list(self.wp), ws=self.ws,
            rp=[list(row) for row in self.rp], rs=[list(row) for row in self.rs],
            theta=None if self.theta is None else [m.copy() for m in self.theta])

    def objective(self) -> float:
        return float(sum(sum(row) for row in self.rp) + sum(sum(row) for row in self.rs))


@dataclass
class ConstraintReport:
    """Normalized residuals keyed by constraint id; feasible iff all <= 0."""

    residuals: dict = field(default_factory=dict)
    objective: float = 0.0

    @property
    def worst(self):
        cid = max(self.residuals, key=lambda c: self.residuals[c])
        return cid, self.residuals[cid]

    def is_feasible(self, tol: float = 0.0) -> bool:
        return all(v <= tol for v in self.residuals.values())


def _check_hermitian(mat: np.ndarray, name: str) -> np.ndarray:
    scale = max(float(np.linalg.norm(mat)), 1.0)
    if np.linalg.norm(mat - mat.conj().T) > _HERM_TOL * scale:
        raise ValueError(f"{name} is not Hermitian within tolerance")
    return 0.5 * (mat + mat.conj().T)


def _logdet_pd(mat: np.ndarray, what: str) -> float:
    sign, val = np.linalg.slogdet(mat)
    if sign.real <= 0 or not np.isfinite(val):
        raise SingularMatrixError(f"{what} is not positive definite")
    return float(val)


def phi_logdet(a: np.ndarray, b: np.ndarray) -> float:
    """log2 det(A + B) - log2 det(B) for PSD A and PD B, in bits."""
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    b = np.atleast_2d(np.asarray(b, dtype=complex))
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    a = _check_hermitian(a, "A")
    b = _check_hermitian(b, "B")
    return (_logdet_pd(a + b, "A + B") - _logdet_pd(b, "B")) / LN2


def _blockdiag(blocks) -> np.ndarray:
    dims = [b.shape[0] for b in blocks]
    out = np.zeros((sum(dims), sum(dims)), dtype=complex)
    off = 0
    for b in blocks:
        out[off:off + b.shape[0], off:off + b.shape[0]] = b
        off += b.shape[0]
    return out


def _quad(h: np.ndarray, cov: np.ndarray) -> np.ndarray:
    return h @ cov @ h.conj().T


def lam_matrix(i: int, point: DesignPoint) -> np.ndarray:
    """Stacked quantization covariance of CP i's joint fronthaul/backhaul noise."""
    if point.theta is None:
        raise UnsupportedModeError("theta is absent; point is not in multivariate mode")
    om = point.omega_s[i][0]
    sg = point.sigma[other(i)][0]
    th = point.theta[i]
    return np.block([[om, th], [th.conj().T, sg]])


def _shared_quant_noise(i: int, k: int, point: DesignPoint,
                        channels: ChannelRealization, mode: str) -> np.ndarray:
    """Total quantization-noise covariance seen by UE (i,k) on the shared band."""
    cfg = channels.config
    if mode == MODE_MULTIVARIATE:
        if cfg.n_rus != 1:
            raise UnsupportedModeError("multivariate compression requires a single RU per operator")
        out = 0
        for j in range(2):
            g = channels.g_op(i, k, j)
            out = out + _quad(g, lam_matrix(j, point))
        return out
    out = 0
    for j in range(2):
        h = channels.h_op(i, k, j)
        out = out + _quad(h, _blockdiag(point.omega_s[j]) + _blockdiag(point.sigma[j]))
    return out


def rate_private(i: int, k: int, point: DesignPoint,
                 channels: ChannelRealization) -> float:
    """Achievable private-subband spectral efficiency of UE (i,k), interference as noise."""
    cfg = channels.config
    h = channels.h_op(i, k, i)
    sig = _quad(h, point.vtil[i][k])
    noise = np.eye(cfg.n_ant_ue[i][k], dtype=complex) + _quad(h, _blockdiag(point.omega_p[i]))
    for l in range(cfg.n_ues):
        if l != k:
            noise = noise + _quad(h, point.vtil[i][l])
    return phi_logdet(sig, noise)


def rate_shared(i: int, k: int, point: DesignPoint, channels: ChannelRealization,
                mode: str = MODE_P2P) -> float:
    """Achievable shared-subband spectral efficiency of UE (i,k).

    The desired term combines both operators' precoders for UE (i,k) through
    the stacked channel; all other streams, fronthaul/backhaul quantization
    noise (jointly, via the stacked covariances, in multivariate mode) and
    thermal noise are treated as interference.
    """
    cfg = channels.config
    ib = other(i)
    g_own = channels.g_op(i, k, i)
    g_oth = channels.g_op(i, k, ib)
    sig = _quad(g_own, point.util[i][k])
    noise = np.eye(cfg.n_ant_ue[i][k], dtype=complex) \
        + _shared_quant_noise(i, k, point, channels, mode)
    for l in range(cfg.n_ues):
        if l != k:
            noise = noise + _quad(g_own, point.util[i][l])
        noise = noise + _quad(g_oth, point.util[ib][l])
    return phi_logdet(sig, noise)


def fronthaul_rate(i: int, r: int, band: str, point: DesignPoint,
                   config: NetworkConfig) -> float:
    """Per-Hz rate needed on CP i's fronthaul to RU (i,r) for the given subband."""
    if band == PRIVATE:
        e = selection_matrix("E", i, r, config)
        sig = sum(_quad(e.T, point.vtil[i][k]) for k in range(config.n_ues))
        return phi_logdet(sig, point.omega_p[i][r])
    if band == SHARED:
        e = selection_matrix("Etil", i, r, config)
        sig = sum(_quad(e.T, point.util[i][k]) for k in range(config.n_ues))
        return phi_logdet(sig, point.omega_s[i][r])
    raise ValueError(f"band must be {PRIVATE!r} or {SHARED!r}, got {band!r}")


def backhaul_rate(i_sender: int, r: int, point: DesignPoint,
                  config: NetworkConfig) -> float:
    """Per-Hz rate CP ``i_sender`` needs for the cross signal destined to RU (ibar, r)."""
    e = selection_matrix("Ebar", i_sender, r, config)
    sig = sum(_quad(e.T, point.util[i_sender][k]) for k in range(config.n_ues))
    return phi_logdet(sig, point.sigma[other(i_sender)][r])


def privacy_leakage(i: int, k: int, point: DesignPoint,
                    config: NetworkConfig) -> float:
    """Per-Hz rate the other CP can infer about UE (i,k)'s shared stream."""
    e = selection_matrix("Ebar_op", i, 0, config)
    num = _quad(e.T, point.util[i][k])
    den = _blockdiag(point.sigma[other(i)])
    for l in range(config.n_ues):
        if l != k:
            den = den + _quad(e.T, point.util[i][l])
    return phi_logdet(num, den)


def power_per_hz(i: int, r: int, band: str, point: DesignPoint,
                 config: NetworkConfig) -> float:
    """Per-Hz transmit power of RU (i,r) on the given subband."""
    if band == PRIVATE:
        e = selection_matrix("E", i, r, config)
        tot = sum(np.trace(_quad(e.T, point.vtil[i][k])).real for k in range(config.n_ues))
        return float(tot + np.trace(point.omega_p[i][r]).real)
    if band == SHARED:
        et = selection_matrix("Etil", i, r, config)
        eb = selection_matrix("Ebar", other(i), r, config)
        tot = sum(np.trace(_quad(et.T, point.util[i][k])).real for k in range(config.n_ues))
        tot += sum(np.trace(_quad(eb.T, point.util[other(i)][k])).real
                   for k in range(config.n_ues))
        return float(tot + np.trace(point.omega_s[i][r]).real
                     + np.trace(point.sigma[i][r]).real)
    raise ValueError(f"band must be {PRIVATE!r} or {SHARED!r}, got {band!r}")


def multivariate_joint_rate(i: int, point: DesignPoint,
                            config: NetworkConfig) -> float:
    """Per-Hz rate of CP i's joint quantization of its own and the cross signal.

    Equals the sum of the two marginal compression rates plus the penalty for
    correlating the noises (zero when theta is zero).
    """
    if config.n_rus != 1:
        raise UnsupportedModeError("multivariate compression requires a single RU per operator")
    et = selection_matrix("Etil", i, 0, config)
    eb = selection_matrix("Ebar", i, 0, config)
    x = sum(_quad(et.T, point.util[i][k]) for k in range(config.n_ues))
    y = sum(_quad(eb.T, point.util[i][k]) for k in range(config.n_ues))
    lam = lam_matrix(i, point)
    return (_logdet_pd(x + point.omega_s[i][0], "X + Omega")
            + _logdet_pd(y + point.sigma[other(i)][0], "Y + Sigma")
            - _logdet_pd(lam, "Lambda")) / LN2


def _multivariate_residual(point: DesignPoint, config: NetworkConfig,
                           base_f: list, base_b: list, joint: list,
                           marg: list) -> float:
    """Worst normalized fronthaul/backhaul violation once each CP's joint-rate
    excess is optimally split between its fronthaul and backhaul budgets.

    The two CPs' allocations compete for the same fronthaul slack (CP i's
    own-signal extra and CP ibar's cross-signal extra both land on fronthaul
    i), so this is a small LP rather than a closed form.  With theta = 0 the
    excesses vanish and this reduces to the plain link residuals.
    """
    ws = point.ws
    excess = [max(ws * (joint[i] - marg[i]), 0.0) for i in range(2)]
    # variables: x0, x1 (extra on own fronthaul), y0, y1 (extra on backhaul), s
    cf = [config.fronthaul_capacity[i][0] for i in range(2)]
    cb = list(config.backhaul_capacity)
    a_ub, b_ub = [], []
    for i in range(2):
        row = [0.0] * 5
        row[i] = -1.0
        row[2 + i] = -1.0
        a_ub.append(row)
        b_ub.append(-excess[i])
    for i in range(2):
        row = [0.0] * 5
        row[i] = 1.0 / cf[i]          # x_i on fronthaul i
        row[2 + other(i)] = 1.0 / cf[i]  # y_ibar (cross extra for RU (i,1)) on fronthaul i
        row[4] = -1.0
        a_ub.append(row)
        b_ub.append(1.0 - base_f[i] / cf[i])
    for i in range(2):
        row = [0.0] * 5
        row[2 + i] = 1.0 / cb[i]
        row[4] = -1.0
        a_ub.append(row)
        b_ub.append(1.0 - base_b[i] / cb[i])
    res = linprog(c=[0.0, 0.0, 0.0, 0.0, 1.0], A_ub=a_ub, b_ub=b_ub,
                  bounds=[(0, None)] * 4 + [(None, None)], method="highs")
    if not res.success:
        raise RuntimeError(f"multivariate budget LP failed: {res.message}")
    return float(res.x[4])


def evaluate_constraints(point: DesignPoint, channels: ChannelRealization,
                         config: NetworkConfig, mode: str = MODE_P2P) -> ConstraintReport:
    """All constraint residuals of the joint design problem at a design point.

    Residuals are normalized by the constraint's right-hand side (feasible iff
    <= 0); the bandwidth row is ``|sum - W| / W``.  The report's objective is
    the plain sum rate carried by the point.
    """
    res = {}
    rate_floor = 1e-6 * config.total_bandwidth
    wp, ws = point.wp, point.ws

    for i in range(2):
        for k in range(config.n_ues):
            fp = rate_private(i, k, point, channels)
            rhs = wp[i] * fp
            res[f"rate_private[{i}][{k}]"] = (point.rp[i][k] - rhs) / max(rhs, rate_floor)
            fs = rate_shared(i, k, point, channels, mode)
            rhs = ws * fs
            res[f"rate_shared[{i}][{k}]"] = (point.rs[i][k] - rhs) / max(rhs, rate_floor)
            lhs = ws * privacy_leakage(i, k, point, config)
            res[f"privacy[{i}][{k}]"] = (lhs - config.privacy_threshold) / config.privacy_threshold

    for i in range(2):
        lhs_b = sum(ws * backhaul_rate(i, r, point, config) for r in range(config.n_rus))
        res[f"backhaul[{i}]"] = (lhs_b - config.backhaul_capacity[i]) / config.backhaul_capacity[i]
        for r in range(config.n_rus):
            lhs = (wp[i] * fronthaul_rate(i, r, PRIVATE, point, config)
                   + ws * fronthaul_rate(i, r, SHARED, point, config)
                   + ws * backhaul_rate(other(i), r, point, config))
            cap = config.fronthaul_capacity[i][r]
            res[f"fronthaul[{i}][{r}]"] = (lhs - cap) / cap
            p = (wp[i] * power_per_hz(i, r, PRIVATE, point, config)
                 + ws * power_per_hz(i, r, SHARED, point, config))
            res[f"power[{i}][{r}]"] = (p - config.max_power[i][r]) / config.max_power[i][r]

    res["bandwidth"] = abs(wp[0] + wp[1] + ws - config.total_bandwidth) / config.total_bandwidth

    if mode == MODE_MULTIVARIATE:
        # n_rus == 1 enforced by multivariate_joint_rate
        joint = [multivariate_joint_rate(i, point, config) for i in range(2)]
        marg = [fronthaul_rate(i, 0, SHARED, point, config)
                + backhaul_rate(i, 0, point, config) for i in range(2)]
        base_f = [(wp[i] * fronthaul_rate(i, 0, PRIVATE, point, config)
                   + ws * fronthaul_rate(i, 0, SHARED, point, config)
                   + ws * backhaul_rate(other(i), 0, point, config)) for i in range(2)]
        base_b = [ws * backhaul_rate(i, 0, point, config) for i in range(2)]
        res["multivariate"] = _multivariate_residual(point, config, base_f, base_b,
                                                     joint, marg)

    return ConstraintReport(residuals=res, objective=point.objective())


def achievable_rates(point: DesignPoint, channels: ChannelRealization,
                     mode: str = MODE_P2P) -> tuple:
    """Exact (rp, rs) rate arrays ``W * f`` for the point's covariances and bandwidths."""
    cfg = channels.config
    rp = [[point.wp[i] * rate_private(i, k, point, channels)
           for k in range(cfg.n_ues)] for i in range(2)]
    rs = [[point.ws * rate_shared(i, k, point, channels, mode)
           for k in range(cfg.n_ues)] for i in range(2)]
    return rp, rs
