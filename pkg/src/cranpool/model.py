"""Scenario definition, random geometry/channel generation and dimension bookkeeping.

Two operators, each with one cloud processor (CP), ``n_rus`` radio units (RUs)
and ``n_ues`` user equipments (UEs).  All downlink processing elsewhere in the
package is covariance-domain; this module owns the static scenario parameters,
the random drop (node positions, Rayleigh channel draws) and the stacking /
selection matrices that every rate and power functional is written with.

Randomness uses the counter-based Philox4x64-10 bit generator keyed directly by
the user seed, so a (config, seed) pair reproduces bit-identical drops on any
platform.  The maximum RU power is derived from an SNR knob as
``P = W * 10**(snr_db/10)`` with the noise PSD normalized to one, so a flat
allocation gives a per-Hz SNR of ``10**(snr_db/10)`` at unit channel gain.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, DimensionError

N_OPERATORS = 2

_SELECTION_KINDS = ("E", "Etil", "Ebar", "Ebar_op")


def other(i: int) -> int:
    """Index of the other operator (0 <-> 1)."""
    return 1 - i


@dataclass(frozen=True)
class NetworkConfig:
    """Static scenario parameters.

    Per-entity fields are nested tuples indexed ``[operator][ru]`` or
    ``[operator][ue]``.  Capacities and rates are in the same frequency/rate
    unit family as ``total_bandwidth`` (Hz and bit/s at the public interface;
    the math is unit-covariant, so a uniformly rescaled copy behaves
    identically).  ``max_power`` is power x bandwidth with unit noise PSD.
    """

    n_rus: int = 1
    n_ues: int = 1
    n_ant_ru: tuple = ((1,), (1,))          # [i][r]
    n_ant_ue: tuple = ((1,), (1,))          # [i][k]
    stream_dim_private: tuple = ((1,), (1,))  # [i][k]
    stream_dim_shared: tuple = ((1,), (1,))   # [i][k]
    backhaul_capacity: tuple = (100e6, 100e6)       # [i], bit/s
    fronthaul_capacity: tuple = ((50e6,), (50e6,))  # [i][r], bit/s
    max_power: tuple = ((1e8,), (1e8,))             # [i][r], power*Hz
    total_bandwidth: float = 10e6                    # Hz
    privacy_threshold: float = 20e6                  # bit/s
    path_loss_exponent: float = 3.0
    reference_distance: float = 50.0                 # m
    area_radius: float = 100.0                       # m

    @property
    def n_operators(self) -> int:
        return N_OPERATORS

    def n_ant_op(self, i: int) -> int:
        """Total RU antennas n_{R,i} of operator ``i``."""
        return int(sum(self.n_ant_ru[i]))

    def ru_offset(self, i: int, r: int) -> int:
        """Row offset of RU (i, r)'s antenna block within operator i's stack."""
        return int(sum(self.n_ant_ru[i][:r]))

    def stacked_dim(self, i: int) -> int:
        """Dimension n_{R,i} + n_{R,ibar} of operator i's lifted shared precoder."""
        return self.n_ant_op(i) + self.n_ant_op(other(i))

    def power_scale(self) -> float:
        """Largest per-Hz power budget; sets the epsilon floors downstream."""
        return max(max(p) for p in self.max_power) / self.total_bandwidth

    def validate(self) -> "NetworkConfig":
        if self.n_rus < 1:
            raise ConfigError("n_rus must be >= 1")
        if self.n_ues < 1:
            raise ConfigError("n_ues must be >= 1")
        for name, per_ru in (("n_ant_ru", self.n_ant_ru),
                             ("fronthaul_capacity", self.fronthaul_capacity),
                             ("max_power", self.max_power)):
            if len(per_ru) != N_OPERATORS or any(len(row) != self.n_rus for row in per_ru):
                raise ConfigError(f"{name} must be shaped [2][{self.n_rus}]")
        for name, per_ue in (("n_ant_ue", self.n_ant_ue),
                             ("stream_dim_private", self.stream_dim_private),
                             ("stream_dim_shared", self.stream_dim_shared)):
            if len(per_ue) != N_OPERATORS or any(len(row) != self.n_ues for row in per_ue):
                raise ConfigError(f"{name} must be shaped [2][{self.n_ues}]")
        if any(a < 1 for row in self.n_ant_ru for a in row):
            raise ConfigError("n_ant_ru entries must be >= 1")
        if any(a < 1 for row in self.n_ant_ue for a in row):
            raise ConfigError("n_ant_ue entries must be >= 1")
        for name, dims in (("stream_dim_private", self.stream_dim_private),
                           ("stream_dim_shared", self.stream_dim_shared)):
            for i in range(N_OPERATORS):
                for k in range(self.n_ues):
                    d = dims[i][k]
                    if d < 1 or d > self.n_ant_ue[i][k]:
                        raise ConfigError(
                            f"{name}[{i}][{k}] must be in [1, n_ant_ue[{i}][{k}]]")
        positives = {
            "backhaul_capacity": min(self.backhaul_capacity),
            "fronthaul_capacity": min(min(row) for row in self.fronthaul_capacity),
            "max_power": min(min(row) for row in self.max_power),
            "total_bandwidth": self.total_bandwidth,
            "privacy_threshold": self.privacy_threshold,
            "area_radius": self.area_radius,
            "reference_distance": self.reference_distance,
        }
        for key, val in positives.items():
            if not val > 0:
                raise ConfigError(f"{key} must be > 0")
        return self

    def rescaled(self, factor: float) -> "NetworkConfig":
        """Copy with all Hz / bit-per-second / power quantities divided by ``factor``.

        Used by the experiments layer to run the solver in MHz / Mbit/s for
        conditioning; geometry fields are untouched.
        """
        return replace(
            self,
            backhaul_capacity=tuple(c / factor for c in self.backhaul_capacity),
            fronthaul_capacity=tuple(tuple(c / factor for c in row)
                                     for row in self.fronthaul_capacity),
            max_power=tuple(tuple(p / factor for p in row) for row in self.max_power),
            total_bandwidth=self.total_bandwidth / factor,
            privacy_threshold=self.privacy_threshold / factor,
        )

    @classmethod
    def symmetric(cls, n_rus: int = 1, n_ues: int = 1, n_ant_ru: int = 1,
                  n_ant_ue: int = 1, snr_db: float = 10.0,
                  backhaul_capacity: float = 100e6, fronthaul_capacity: float = 50e6,
                  total_bandwidth: float = 10e6, privacy_threshold: float = 20e6,
                  stream_dim: int | None = None, **kwargs) -> "NetworkConfig":
        """Symmetric scenario builder; stream dims default to the UE antenna count."""
        d = n_ant_ue if stream_dim is None else stream_dim
        power = total_bandwidth * 10.0 ** (snr_db / 10.0)
        cfg = cls(
            n_rus=n_rus,
            n_ues=n_ues,
            n_ant_ru=tuple((n_ant_ru,) * n_rus for _ in range(N_OPERATORS)),
            n_ant_ue=tuple((n_ant_ue,) * n_ues for _ in range(N_OPERATORS)),
            stream_dim_private=tuple((d,) * n_ues for _ in range(N_OPERATORS)),
            stream_dim_shared=tuple((d,) * n_ues for _ in range(N_OPERATORS)),
            backhaul_capacity=(backhaul_capacity,) * N_OPERATORS,
            fronthaul_capacity=tuple((fronthaul_capacity,) * n_rus
                                     for _ in range(N_OPERATORS)),
            max_power=tuple((power,) * n_rus for _ in range(N_OPERATORS)),
            total_bandwidth=total_bandwidth,
            privacy_threshold=privacy_threshold,
            **kwargs,
        )
        return cfg.validate()


@dataclass(frozen=True)
class ChannelRealization:
    """One random drop: all per-link channel matrices plus node positions.

    ``h[i][k][j][r]`` is the (n_ant_ue[i][k] x n_ant_ru[j][r]) complex channel
    from RU (j, r) to UE (i, k).  Reconstructible bit-exactly from
    (config, seed) via :func:`sample_channels`.
    """

    config: NetworkConfig
    h: tuple                  # [i][k][j][r] -> complex ndarray
    positions_ru: np.ndarray  # (2, n_rus, 2) meters
    positions_ue: np.ndarray  # (2, n_ues, 2) meters
    seed: int

    def h_op(self, i: int, k: int, j: int) -> np.ndarray:
        """H_{i,k}^j: horizontal stack of UE (i,k)'s channels from all RUs of operator j."""
        return np.concatenate([self.h[i][k][j][r] for r in range(self.config.n_rus)], axis=1)

    def g_op(self, i: int, k: int, j: int) -> np.ndarray:
        """G_{i,k}^j = [H_{i,k}^j  H_{i,k}^jbar]: stack over both operators, j first."""
        return np.concatenate([self.h_op(i, k, j), self.h_op(i, k, other(j))], axis=1)

    def validate(self) -> "ChannelRealization":
        cfg = self.config
        for i in range(N_OPERATORS):
            for k in range(cfg.n_ues):
                for j in range(N_OPERATORS):
                    for r in range(cfg.n_rus):
                        want = (cfg.n_ant_ue[i][k], cfg.n_ant_ru[j][r])
                        got = self.h[i][k][j][r].shape
                        if got != want:
                            raise DimensionError(
                                f"h[{i}][{k}][{j}][{r}] has shape {got}, expected {want}")
        return self


def _rng(seed: int) -> np.random.Generator:
    # Philox4x64-10, keyed by the raw seed: counter-based, portable across builds.
    return np.random.Generator(np.random.Philox(key=seed & 0xFFFFFFFFFFFFFFFF))


def _draw_disc_points(rng: np.random.Generator, n: int, radius: float) -> np.ndarray:
    """Uniform points in the disc of given radius, shape (n, 2)."""
    r = radius * np.sqrt(rng.uniform(size=n))
    theta = 2.0 * np.pi * rng.uniform(size=n)
    return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1)


def _draw_all_positions(rng: np.random.Generator, config: NetworkConfig):
    pos_ru = _draw_disc_points(rng, N_OPERATORS * config.n_rus, config.area_radius)
    pos_ue = _draw_disc_points(rng, N_OPERATORS * config.n_ues, config.area_radius)
    return (pos_ru.reshape(N_OPERATORS, config.n_rus, 2),
            pos_ue.reshape(N_OPERATORS, config.n_ues, 2))


def sample_positions(config: NetworkConfig, seed: int):
    """Draw RU and UE positions uniformly over the shared disc.

    Returns ``(positions_ru, positions_ue)`` with shapes (2, n_rus, 2) and
    (2, n_ues, 2).  Both operators draw from the same disc; the draw order is
    RUs then UEs, operator-major, so :func:`sample_channels` reproduces the
    exact same positions from the same seed.
    """
    return _draw_all_positions(_rng(seed), config)


def path_loss(distance, config: NetworkConfig):
    """Path-loss gain 1 / (1 + (D / D_0)^alpha); equals 1 at D = 0."""
    d = np.asarray(distance, dtype=float)
    return 1.0 / (1.0 + (d / config.reference_distance) ** config.path_loss_exponent)


def complex_gaussian(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    """Matrix of iid circularly-symmetric complex Gaussian entries, unit variance."""
    return (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2.0)


def sample_channels(config: NetworkConfig, seed: int) -> ChannelRealization:
    """Draw a full channel realization for (config, seed).

    Positions are drawn exactly as :func:`sample_positions` (same stream, same
    order), then each link gets ``sqrt(rho) * Htilde`` with ``rho`` the
    path-loss at the RU-UE distance and ``Htilde`` iid unit-variance complex
    Gaussian.  Link draw order is (i, k, j, r) lexicographic.
    """
    rng = _rng(seed)
    pos_ru, pos_ue = _draw_all_positions(rng, config)

    h = []
    for i in range(N_OPERATORS):
        per_ue = []
        for k in range(config.n_ues):
            per_op = []
            for j in range(N_OPERATORS):
                per_ru = []
                for r in range(config.n_rus):
                    dist = float(np.linalg.norm(pos_ue[i, k] - pos_ru[j, r]))
                    rho = float(path_loss(dist, config))
                    raw = complex_gaussian(rng, config.n_ant_ue[i][k], config.n_ant_ru[j][r])
                    per_ru.append(np.sqrt(rho) * raw)
                per_op.append(tuple(per_ru))
            per_ue.append(tuple(per_op))
        h.append(tuple(per_ue))
    real = ChannelRealization(config=config, h=tuple(h), positions_ru=pos_ru,
                              positions_ue=pos_ue, seed=seed)
    return real.validate()


def selection_matrix(kind: str, i: int, r: int, config: NetworkConfig) -> np.ndarray:
    """Zero/identity selection matrices used by the compression and privacy functionals.

    kind 'E'      : (n_{R,i} x n_{R,i,r}), identity rows at RU (i,r)'s block.
    kind 'Etil'   : (n_{R,i}+n_{R,ibar} x n_{R,i,r}), 'E' on top of zeros;
                    selects RU (i,r)'s slice of the own-RU part of the lifted
                    shared covariance U_{i,.}.
    kind 'Ebar'   : (n_{R,i}+n_{R,ibar} x n_{R,ibar,r}), zeros on top of
                    E_{ibar,r}; selects RU (ibar,r)'s slice of the cross part.
    kind 'Ebar_op': (n_{R,i}+n_{R,ibar} x n_{R,ibar}), zeros on top of the
                    identity; selects the whole cross part (``r`` ignored).
    """
    if kind not in _SELECTION_KINDS:
        raise ValueError(f"unknown selection kind {kind!r}; expected one of {_SELECTION_KINDS}")
    if not 0 <= i < N_OPERATORS:
        raise IndexError(f"operator index {i} out of range")
    if kind != "Ebar_op" and not 0 <= r < config.n_rus:
        raise IndexError(f"RU index {r} out of range")

    ib = other(i)
    n_i, n_ib = config.n_ant_op(i), config.n_ant_op(ib)

    def block_e(op: int, ru: int) -> np.ndarray:
        mat = np.zeros((config.n_ant_op(op), config.n_ant_ru[op][ru]))
        off = config.ru_offset(op, ru)
        mat[off:off + config.n_ant_ru[op][ru], :] = np.eye(config.n_ant_ru[op][ru])
        return mat

    if kind == "E":
        return block_e(i, r)
    if kind == "Etil":
        return np.vstack([block_e(i, r), np.zeros((n_ib, config.n_ant_ru[i][r]))])
    if kind == "Ebar":
        return np.vstack([np.zeros((n_i, config.n_ant_ru[ib][r])), block_e(ib, r)])
    # Ebar_op
    return np.vstack([np.zeros((n_i, n_ib)), np.eye(n_ib)])


def save_channels(realization: ChannelRealization, path) -> None:
    """Dump a realization to a self-describing .npz (real/imag pairs keyed by (i,k,j,r))."""
    cfg = realization.config
    arrays = {
        "seed": np.array(realization.seed, dtype=np.int64),
        "n_rus": np.array(cfg.n_rus), "n_ues": np.array(cfg.n_ues),
        "positions_ru": realization.positions_ru,
        "positions_ue": realization.positions_ue,
    }
    for i in range(N_OPERATORS):
        for k in range(cfg.n_ues):
            for j in range(N_OPERATORS):
                for r in range(cfg.n_rus):
                    blk = realization.h[i][k][j][r]
                    arrays[f"h_re_{i}_{k}_{j}_{r}"] = blk.real
                    arrays[f"h_im_{i}_{k}_{j}_{r}"] = blk.imag
    np.savez(Path(path), **arrays)


def load_channels(path, config: NetworkConfig) -> ChannelRealization:
    """Inverse of :func:`save_channels`; validates dimensions against ``config``."""
    data = np.load(Path(path))
    h = tuple(
        tuple(
            tuple(
                tuple(data[f"h_re_{i}_{k}_{j}_{r}"] + 1j * data[f"h_im_{i}_{k}_{j}_{r}"]
                      for r in range(config.n_rus))
                for j in range(N_OPERATORS))
            for k in range(config.n_ues))
        for i in range(N_OPERATORS))
    real = ChannelRealization(config=config, h=h, positions_ru=data["positions_ru"],
                              positions_ue=data["positions_ue"], seed=int(data["seed"]))
    return real.validate()
