import numpy as np
import pytest

from cranpool.metrics import DesignPoint
from cranpool.model import ChannelRealization, NetworkConfig


def siso_config(snr_db=10.0, **kwargs) -> NetworkConfig:
    """Reference-experiment scenario (single RU/UE/antenna per operator), MHz/Mbit units."""
    return NetworkConfig.symmetric(snr_db=snr_db, **kwargs).rescaled(1e6)


def manual_channels(config: NetworkConfig, values) -> ChannelRealization:
    """ChannelRealization with prescribed entries.

    ``values[i][k][j][r]`` may be a scalar or an array of the right shape.
    """
    h = []
    for i in range(2):
        per_ue = []
        for k in range(config.n_ues):
            per_op = []
            for j in range(2):
                per_ru = []
                for r in range(config.n_rus):
                    val = np.asarray(values[i][k][j][r], dtype=complex)
                    if val.ndim == 0:
                        val = val.reshape(1, 1)
                    per_ru.append(val)
                per_op.append(tuple(per_ru))
            per_ue.append(tuple(per_op))
        h.append(tuple(per_ue))
    real = ChannelRealization(config=config, h=tuple(h),
                              positions_ru=np.zeros((2, config.n_rus, 2)),
                              positions_ue=np.zeros((2, config.n_ues, 2)),
                              seed=-1)
    return real.validate()


def unit_siso_channels(config: NetworkConfig, own=1.0, cross=1.0) -> ChannelRealization:
    """All own-links ``own`` and cross-links ``cross`` (SISO)."""
    vals = [[[[own if i == j else cross for r in range(config.n_rus)]
              for j in range(2)] for k in range(config.n_ues)] for i in range(2)]
    return manual_channels(config, vals)


def random_psd(rng, n, rank=None, scale=1.0):
    rank = n if rank is None else rank
    x = (rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))) / np.sqrt(2)
    return scale * (x @ x.conj().T)


def random_point(config: NetworkConfig, rng, quant_floor=1e-3, precoder_scale=None,
                 multivariate=False, theta_scale=0.0) -> DesignPoint:
    """Random valid DesignPoint with PD quantization blocks."""
    scale = config.power_scale() if precoder_scale is None else precoder_scale
    point = DesignPoint.zeros(config, quant_floor=quant_floor, multivariate=multivariate)
    for i in range(2):
        for k in range(config.n_ues):
            point.vtil[i][k] = random_psd(rng, config.n_ant_op(i),
                                          rank=config.stream_dim_private[i][k],
                                          scale=scale / 4)
            point.util[i][k] = random_psd(rng, config.stacked_dim(i),
                                          rank=config.stream_dim_shared[i][k],
                                          scale=scale / 4)
        for r in range(config.n_rus):
            n = config.n_ant_ru[i][r]
            point.omega_p[i][r] = random_psd(rng, n, scale=quant_floor) + quant_floor * np.eye(n)
            point.omega_s[i][r] = random_psd(rng, n, scale=quant_floor) + quant_floor * np.eye(n)
            point.sigma[i][r] = random_psd(rng, n, scale=quant_floor) + quant_floor * np.eye(n)
    if multivariate and theta_scale > 0:
        for i in range(2):
            n_i, n_ib = config.n_ant_ru[i][0], config.n_ant_ru[1 - i][0]
            # keep the stacked covariance comfortably PD
            off = theta_scale * (rng.standard_normal((n_i, n_ib))
                                 + 1j * rng.standard_normal((n_i, n_ib)))
            lam = np.block([[point.omega_s[i][0], off],
                            [off.conj().T, point.sigma[1 - i][0]]])
            evmin = np.linalg.eigvalsh(lam).min()
            if evmin <= 0:
                off = off * 0.25 * quant_floor / (abs(evmin) + 0.25 * quant_floor)
            point.theta[i] = off
    return point


@pytest.fixture
def rng():
    return np.random.default_rng(20260808)
