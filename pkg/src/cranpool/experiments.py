"""Reproduction harness: scenario sweeps, trial records, config and CSV I/O.

Public quantities are in SI units (Hz, bit/s); internally every solve runs on
a config rescaled to MHz / Mbit/s for solver conditioning.  Sweeps iterate the
privacy thresholds in ascending order and warm-start each cell's CCCP from the
previous cell's solution, which both speeds the sweep up and makes the
rate-vs-privacy trade-off curves monotone for matched seeds.  The no-pooling
baseline has no shared band, hence no privacy-threshold or compression-mode
dependence; it is solved once per (snr, trial) and its record replicated
across those cells.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, fields, replace
from multiprocessing import Pool
from pathlib import Path

from .dcp import (
    SCHEME_EQUAL,
    SCHEME_NO_POOLING,
    SCHEME_OPTIMIZED,
    SCHEMES,
    as_multivariate,
)
from .errors import ConfigError
from .metrics import MODE_MULTIVARIATE, MODE_P2P
from .model import NetworkConfig, sample_channels
from .solver import CccpOptions, Solution, STATUS_SOLVER_FAILURE, cccp, default_backend

UNIT_SCALE = 1e6   # solver runs in MHz / Mbit/s

MODES = (MODE_P2P, MODE_MULTIVARIATE)

CSV_HEADER = ("scenario_id,seed,snr_db,gamma_privacy_bps,scheme,mode,"
              "rate_per_ue_bps,secrecy_rate_per_ue_bps,w_p1_hz,w_p2_hz,w_s_hz,"
              "iterations,status")


@dataclass(frozen=True)
class SweepSpec:
    snr_list_db: tuple = (10.0, 15.0, 20.0)
    privacy_list_bps: tuple = (5e6, 10e6, 15e6, 20e6, 30e6, 40e6, 50e6, 60e6)
    schemes: tuple = SCHEMES
    modes: tuple = (MODE_P2P,)
    trials: int = 20
    base_seed: int = 0

    def validate(self) -> "SweepSpec":
        if not self.snr_list_db or not self.privacy_list_bps:
            raise ConfigError("snr_list_db and privacy_list_bps must be non-empty")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        for s in self.schemes:
            if s not in SCHEMES:
                raise ConfigError(f"unknown scheme {s!r}")
        for m in self.modes:
            if m not in MODES:
                raise ConfigError(f"unknown mode {m!r}")
        if not self.schemes or not self.modes:
            raise ConfigError("schemes and modes must be non-empty")
        return self


@dataclass
class TrialRecord:
    scenario_id: str
    seed: int
    snr_db: float
    gamma_privacy_bps: float
    scheme: str
    mode: str
    rate_per_ue_bps: float
    secrecy_rate_per_ue_bps: float
    w_p1_hz: float
    w_p2_hz: float
    w_s_hz: float
    iterations: int
    status: str


@dataclass
class Aggregate:
    snr_db: float
    gamma_privacy_bps: float
    scheme: str
    mode: str
    n: int
    n_failed: int
    mean_rate_per_ue_bps: float
    mean_secrecy_rate_per_ue_bps: float
    mean_w_p1_frac: float
    mean_w_p2_frac: float
    mean_w_s_frac: float


def secrecy_rate(r_u: float, gamma: float) -> float:
    """Per-UE secrecy rate [R_U - Gamma]^+ in bit/s."""
    return max(r_u - gamma, 0.0)


def snr_db_of(config: NetworkConfig) -> float:
    return 10.0 * math.log10(config.power_scale())


def _record_from_solution(sol: Solution, config: NetworkConfig, seed: int,
                          gamma_bps: float, scheme: str, mode: str,
                          trial: int) -> TrialRecord:
    snr = snr_db_of(config)
    r_u = sol.per_ue_rate * UNIT_SCALE
    return TrialRecord(
        scenario_id=f"snr{snr:g}db_gamma{gamma_bps:g}_{scheme}_{mode}_trial{trial}",
        seed=seed, snr_db=snr, gamma_privacy_bps=gamma_bps, scheme=scheme,
        mode=mode, rate_per_ue_bps=r_u,
        secrecy_rate_per_ue_bps=secrecy_rate(r_u, gamma_bps),
        w_p1_hz=sol.point.wp[0] * UNIT_SCALE, w_p2_hz=sol.point.wp[1] * UNIT_SCALE,
        w_s_hz=sol.point.ws * UNIT_SCALE, iterations=sol.iterations,
        status=sol.status)


def run_trial(config: NetworkConfig, seed: int, scheme: str, mode: str,
              options: CccpOptions = CccpOptions(), trial: int = 0,
              backend=None):
    """One scenario drop solved with one scheme/mode; returns (record, solution).

    Solver failures are captured in the record's status, not raised.
    """
    scaled = config.rescaled(UNIT_SCALE)
    channels = sample_channels(scaled, seed)
    sol = cccp(channels, scaled, mode, scheme, replace(options, seed=seed),
               backend=backend)
    record = _record_from_solution(sol, config, seed, config.privacy_threshold,
                                   scheme, mode, trial)
    return record, sol


def _with_snr(config: NetworkConfig, snr_db: float) -> NetworkConfig:
    power = config.total_bandwidth * 10.0 ** (snr_db / 10.0)
    return replace(config, max_power=tuple((power,) * config.n_rus for _ in range(2)))


def _run_trial_cells(args):
    """All sweep cells for one (snr, trial): the parallelism unit.

    Processes privacy thresholds in ascending order, chaining each
    (scheme, mode) cell's solution into the next cell's restart seeds, and
    always seeds the optimized scheme from the same-cell equal-split solution.
    """
    config, spec, options, snr_db, trial = args
    seed = spec.base_seed + trial
    cfg_snr = _with_snr(config, snr_db)
    backend = default_backend()
    opts = replace(options, seed=seed)
    records = {}

    gammas = sorted(spec.privacy_list_bps)
    need_equal = SCHEME_EQUAL in spec.schemes or SCHEME_OPTIMIZED in spec.schemes

    np_sol = None
    if SCHEME_NO_POOLING in spec.schemes:
        scaled = cfg_snr.rescaled(UNIT_SCALE)
        channels = sample_channels(scaled, seed)
        np_sol = cccp(channels, scaled, MODE_P2P, SCHEME_NO_POOLING, opts,
                      backend=backend)

    modes = sorted(spec.modes, key=lambda m: m == MODE_MULTIVARIATE)  # p2p first
    p2p_exps = {}
    for mode in modes:
        warm = {}
        for gamma in gammas:
            cfg = replace(cfg_snr, privacy_threshold=gamma)
            scaled = cfg.rescaled(UNIT_SCALE)
            channels = sample_channels(scaled, seed)

            def cross_seed(scheme):
                # a point-to-point solution with zero cross-covariance is
                # feasible for the multivariate problem and seeds it
                if mode == MODE_MULTIVARIATE and (gamma, scheme) in p2p_exps:
                    return [as_multivariate(p2p_exps[(gamma, scheme)], scaled)]
                return []

            equal_sol = None
            if need_equal:
                seeds = cross_seed(SCHEME_EQUAL)
                if SCHEME_EQUAL in warm:
                    seeds.append(warm[SCHEME_EQUAL])
                equal_sol = cccp(channels, scaled, mode, SCHEME_EQUAL, opts,
                                 backend=backend, seed_expansions=seeds)
                if equal_sol.expansion is not None:
                    warm[SCHEME_EQUAL] = equal_sol.expansion
                    if mode == MODE_P2P:
                        p2p_exps[(gamma, SCHEME_EQUAL)] = equal_sol.expansion
                if SCHEME_EQUAL in spec.schemes:
                    records[(snr_db, gamma, SCHEME_EQUAL, mode)] = \
                        _record_from_solution(equal_sol, cfg, seed, gamma,
                                              SCHEME_EQUAL, mode, trial)
            if SCHEME_OPTIMIZED in spec.schemes:
                seeds = []
                if equal_sol is not None and equal_sol.expansion is not None:
                    seeds.append(equal_sol.expansion)
                seeds += cross_seed(SCHEME_OPTIMIZED)
                if SCHEME_OPTIMIZED in warm:
                    seeds.append(warm[SCHEME_OPTIMIZED])
                opt_sol = cccp(channels, scaled, mode, SCHEME_OPTIMIZED, opts,
                               backend=backend, seed_expansions=seeds)
                if opt_sol.expansion is not None:
                    warm[SCHEME_OPTIMIZED] = opt_sol.expansion
                    if mode == MODE_P2P:
                        p2p_exps[(gamma, SCHEME_OPTIMIZED)] = opt_sol.expansion
                records[(snr_db, gamma, SCHEME_OPTIMIZED, mode)] = \
                    _record_from_solution(opt_sol, cfg, seed, gamma,
                                          SCHEME_OPTIMIZED, mode, trial)
            if np_sol is not None:
                rec = _record_from_solution(np_sol, cfg, seed, gamma,
                                            SCHEME_NO_POOLING, mode, trial)
                records[(snr_db, gamma, SCHEME_NO_POOLING, mode)] = rec
    return trial, records


def run_sweep(spec: SweepSpec, config: NetworkConfig,
              options: CccpOptions = CccpOptions(), workers: int = 1):
    """Full cross-product sweep; returns (records, aggregates).

    Trials are independent and may run in worker processes; record order is by
    (snr, trial, gamma, mode, scheme) regardless of completion order.
    """
    spec.validate()
    config.validate()
    tasks = [(config, spec, options, snr, trial)
             for snr in spec.snr_list_db for trial in range(spec.trials)]
    if workers > 1:
        with Pool(processes=workers) as pool:
            raw = pool.map(_run_trial_cells, tasks)
    else:
        raw = [_run_trial_cells(t) for t in tasks]

    by_task = {}
    for (cfg, sp, op, snr, trial), (trial_out, cells) in zip(tasks, raw):
        by_task[(snr, trial)] = cells

    records = []
    for snr in spec.snr_list_db:
        for trial in range(spec.trials):
            cells = by_task[(snr, trial)]
            for gamma in sorted(spec.privacy_list_bps):
                for mode in spec.modes:
                    for scheme in SCHEMES:
                        if scheme in spec.schemes:
                            records.append(cells[(snr, gamma, scheme, mode)])
    aggregates = aggregate_records(records, config)
    return records, aggregates


def aggregate_records(records, config: NetworkConfig):
    """Per-(snr, gamma, scheme, mode) means over trials."""
    groups = {}
    for rec in records:
        groups.setdefault((rec.snr_db, rec.gamma_privacy_bps, rec.scheme, rec.mode),
                          []).append(rec)
    w = config.total_bandwidth
    out = []
    for (snr, gamma, scheme, mode), recs in sorted(groups.items()):
        ok = [r for r in recs if r.status != STATUS_SOLVER_FAILURE]
        n = len(recs)
        use = ok if ok else recs
        out.append(Aggregate(
            snr_db=snr, gamma_privacy_bps=gamma, scheme=scheme, mode=mode,
            n=n, n_failed=n - len(ok),
            mean_rate_per_ue_bps=sum(r.rate_per_ue_bps for r in use) / len(use),
            mean_secrecy_rate_per_ue_bps=sum(r.secrecy_rate_per_ue_bps
                                             for r in use) / len(use),
            mean_w_p1_frac=sum(r.w_p1_hz for r in use) / len(use) / w,
            mean_w_p2_frac=sum(r.w_p2_hz for r in use) / len(use) / w,
            mean_w_s_frac=sum(r.w_s_hz for r in use) / len(use) / w,
        ))
    return out


# ---------------------------------------------------------------------------
# CSV I/O


def write_csv(records, path) -> None:
    """Records with the stable header; floats use shortest round-trip repr."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(CSV_HEADER + "\n")
        for rec in records:
            row = [rec.scenario_id, repr(rec.seed), repr(float(rec.snr_db)),
                   repr(float(rec.gamma_privacy_bps)), rec.scheme, rec.mode,
                   repr(float(rec.rate_per_ue_bps)),
                   repr(float(rec.secrecy_rate_per_ue_bps)),
                   repr(float(rec.w_p1_hz)), repr(float(rec.w_p2_hz)),
                   repr(float(rec.w_s_hz)), repr(rec.iterations), rec.status]
            fh.write(",".join(row) + "\n")


def read_csv(path):
    """Inverse of :func:`write_csv`."""
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_HEADER.split(","):
            raise ConfigError(f"unexpected CSV header in {path}")
        for row in reader:
            records.append(TrialRecord(
                scenario_id=row["scenario_id"], seed=int(row["seed"]),
                snr_db=float(row["snr_db"]),
                gamma_privacy_bps=float(row["gamma_privacy_bps"]),
                scheme=row["scheme"], mode=row["mode"],
                rate_per_ue_bps=float(row["rate_per_ue_bps"]),
                secrecy_rate_per_ue_bps=float(row["secrecy_rate_per_ue_bps"]),
                w_p1_hz=float(row["w_p1_hz"]), w_p2_hz=float(row["w_p2_hz"]),
                w_s_hz=float(row["w_s_hz"]), iterations=int(row["iterations"]),
                status=row["status"]))
    return records


def write_aggregates(aggregates, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = [f.name for f in fields(Aggregate)]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(names) + "\n")
        for agg in aggregates:
            fh.write(",".join(repr(getattr(agg, n)) if isinstance(getattr(agg, n), float)
                              else str(getattr(agg, n)) for n in names) + "\n")


def emit_plot_data(aggregates, out_dir) -> list:
    """One rate series and one bandwidth series file per (snr, scheme, mode).

    Rows are sorted by privacy threshold; columns are the secrecy-rate x-axis
    plus the mean per-UE rate (rate files) or the mean bandwidth fractions
    (bandwidth files).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    groups = {}
    for agg in aggregates:
        groups.setdefault((agg.snr_db, agg.scheme, agg.mode), []).append(agg)
    paths = []
    for (snr, scheme, mode), aggs in sorted(groups.items()):
        aggs = sorted(aggs, key=lambda a: a.gamma_privacy_bps)
        tag = f"snr{snr:g}__{scheme}__{mode}"
        rate_path = out_dir / f"rate_vs_secrecy__{tag}.csv"
        with open(rate_path, "w") as fh:
            fh.write("gamma_privacy_bps,secrecy_rate_per_ue_bps,rate_per_ue_bps\n")
            for a in aggs:
                fh.write(f"{a.gamma_privacy_bps!r},{a.mean_secrecy_rate_per_ue_bps!r},"
                         f"{a.mean_rate_per_ue_bps!r}\n")
        bw_path = out_dir / f"bandwidth_vs_secrecy__{tag}.csv"
        with open(bw_path, "w") as fh:
            fh.write("gamma_privacy_bps,secrecy_rate_per_ue_bps,"
                     "w_p1_frac,w_p2_frac,w_s_frac\n")
            for a in aggs:
                fh.write(f"{a.gamma_privacy_bps!r},{a.mean_secrecy_rate_per_ue_bps!r},"
                         f"{a.mean_w_p1_frac!r},{a.mean_w_p2_frac!r},{a.mean_w_s_frac!r}\n")
        paths += [rate_path, bw_path]
    return paths


# ---------------------------------------------------------------------------
# config file


_CONFIG_DEFAULTS = {
    # scenario (SI units); per-RU/UE fields are scalars broadcast to all entities
    "n_rus": 1, "n_ues": 1, "n_ant_ru": 1, "n_ant_ue": 1, "stream_dim": 0,
    "backhaul_capacity_bps": 100e6, "fronthaul_capacity_bps": 50e6,
    "total_bandwidth_hz": 10e6, "privacy_threshold_bps": 20e6,
    "path_loss_exponent": 3.0, "reference_distance_m": 50.0, "area_radius_m": 100.0,
    "snr_db": 10.0,
    # sweep
    "snr_list_db": (10.0, 15.0, 20.0),
    "privacy_list_bps": (5e6, 10e6, 15e6, 20e6, 30e6, 40e6, 50e6, 60e6),
    "schemes": SCHEMES,
    "modes": (MODE_P2P,),
    "trials": 20, "base_seed": 0, "workers": 1,
    # solver options
    "max_iter": 100, "rel_tol": 1e-4, "restarts": 5, "solver_tolerance": 1e-8,
    "seed": 0,
}

_LIST_KEYS = {"snr_list_db", "privacy_list_bps", "schemes", "modes"}
_INT_KEYS = {"n_rus", "n_ues", "n_ant_ru", "n_ant_ue", "stream_dim", "trials",
             "base_seed", "workers", "max_iter", "restarts", "seed"}
_STR_LIST_KEYS = {"schemes", "modes"}


def parse_config(text: str, required=()):
    """Parse the flat key=value config document into a raw settings dict.

    Lines are ``key = value``; '#' starts a comment; list values are
    comma-separated.  Unknown keys are rejected and missing required keys are
    reported by name.
    """
    settings = dict(_CONFIG_DEFAULTS)
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _CONFIG_DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}")
        if not value:
            raise ConfigError(f"missing value for key {key!r}")
        try:
            if key in _LIST_KEYS:
                items = [v.strip() for v in value.split(",") if v.strip()]
                if key in _STR_LIST_KEYS:
                    settings[key] = tuple(items)
                else:
                    settings[key] = tuple(float(v) for v in items)
            elif key in _INT_KEYS:
                settings[key] = int(value)
            else:
                settings[key] = float(value)
        except ValueError as exc:
            raise ConfigError(f"bad value for key {key!r}: {value!r}") from exc
        seen.add(key)
    for key in required:
        if key not in seen:
            raise ConfigError(f"missing required key {key!r}")
    return settings


def config_from_settings(settings: dict):
    """(NetworkConfig, SweepSpec, CccpOptions, workers) from parsed settings."""
    cfg = NetworkConfig.symmetric(
        n_rus=settings["n_rus"], n_ues=settings["n_ues"],
        n_ant_ru=settings["n_ant_ru"], n_ant_ue=settings["n_ant_ue"],
        snr_db=settings["snr_db"],
        backhaul_capacity=settings["backhaul_capacity_bps"],
        fronthaul_capacity=settings["fronthaul_capacity_bps"],
        total_bandwidth=settings["total_bandwidth_hz"],
        privacy_threshold=settings["privacy_threshold_bps"],
        stream_dim=settings["stream_dim"] or None,
        path_loss_exponent=settings["path_loss_exponent"],
        reference_distance=settings["reference_distance_m"],
        area_radius=settings["area_radius_m"],
    )
    spec = SweepSpec(
        snr_list_db=tuple(settings["snr_list_db"]),
        privacy_list_bps=tuple(settings["privacy_list_bps"]),
        schemes=tuple(settings["schemes"]), modes=tuple(settings["modes"]),
        trials=settings["trials"], base_seed=settings["base_seed"],
    ).validate()
    options = CccpOptions(max_iter=settings["max_iter"], rel_tol=settings["rel_tol"],
                          restarts=settings["restarts"],
                          solver_tolerance=settings["solver_tolerance"],
                          seed=settings["seed"])
    return cfg, spec, options, settings["workers"]


def load_config(path, required=()):
    """Read and parse a config file; see :func:`parse_config`."""
    return config_from_settings(parse_config(Path(path).read_text(), required))
