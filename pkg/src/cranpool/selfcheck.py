"""Fast invariant/oracle suites behind the CLI ``check`` subcommand.

Each suite re-verifies a structural property of the implementation on fresh
random draws (tangency and bound direction of the linearizations, functional
identities, determinism, a short end-to-end solve).  The full test suite under
``tests/`` is the authoritative gate; this is the quick field diagnostic.
"""

from __future__ import annotations

import numpy as np

from . import dcp, metrics, solver
from .metrics import MODE_MULTIVARIATE, MODE_P2P
from .model import NetworkConfig, sample_channels


def _random_point(config, rng, multivariate=False, scale=None):
    scale = config.power_scale() if scale is None else scale
    point = metrics.DesignPoint.zeros(config, quant_floor=1e-3 * scale,
                                      multivariate=multivariate)
    for i in range(2):
        for k in range(config.n_ues):
            x = (rng.standard_normal((config.n_ant_op(i), 1))
                 + 1j * rng.standard_normal((config.n_ant_op(i), 1)))
            point.vtil[i][k] = scale / 4 * (x @ x.conj().T)
            y = (rng.standard_normal((config.stacked_dim(i), 1))
                 + 1j * rng.standard_normal((config.stacked_dim(i), 1)))
            point.util[i][k] = scale / 4 * (y @ y.conj().T)
    return point


def check_linearizations(seed: int = 0, draws: int = 50) -> tuple:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(draws):
        x, x0 = rng.uniform(0.1, 5.0, size=2)
        if dcp.scalar_phi(x, x0) < np.log(x) - 1e-12:
            return "linearizations", False, f"scalar phi below ln at x={x}, x0={x0}"
        n = rng.integers(1, 4)
        a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        a = a @ a.conj().T + 0.1 * np.eye(n)
        b = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        b = b @ b.conj().T + 0.1 * np.eye(n)
        gap = dcp.matrix_phi(a, b) - np.linalg.slogdet(a)[1]
        tang = abs(dcp.matrix_phi(a, a) - np.linalg.slogdet(a)[1])
        worst = max(worst, tang)
        if gap < -1e-10 or tang > 1e-10:
            return "linearizations", False, f"bound gap {gap:.2e}, tangency {tang:.2e}"
    return "linearizations", True, f"{draws} draws, worst tangency error {worst:.1e}"


def check_hat_bounds(seed: int = 1, draws: int = 20) -> tuple:
    config = NetworkConfig.symmetric(snr_db=10).rescaled(1e6)
    channels = sample_channels(config, seed)
    rng = np.random.default_rng(seed)
    exp = solver.initialize_feasible(channels, config, seed=seed)
    for _ in range(draws):
        point = _random_point(config, rng)
        f = metrics.rate_private(0, 0, point, channels)
        fhat = dcp.hat_rate_private(0, 0, point, exp, channels)
        if fhat > f + 1e-9:
            return "hat-bounds", False, f"private minorant above exact: {fhat} > {f}"
        g = metrics.fronthaul_rate(0, 0, metrics.SHARED, point, config)
        ghat = dcp.hat_fronthaul(0, 0, metrics.SHARED, point, exp, config)
        if ghat < g - 1e-9:
            return "hat-bounds", False, f"fronthaul majorant below exact: {ghat} < {g}"
        b = metrics.privacy_leakage(0, 0, point, config)
        bhat = dcp.hat_privacy(0, 0, point, exp, config)
        if bhat < b - 1e-9:
            return "hat-bounds", False, f"privacy majorant below exact: {bhat} < {b}"
    return "hat-bounds", True, f"{draws} random points, all bounds on the right side"


def check_multivariate_reduction(seed: int = 2, draws: int = 10) -> tuple:
    config = NetworkConfig.symmetric(snr_db=10).rescaled(1e6)
    channels = sample_channels(config, seed)
    rng = np.random.default_rng(seed)
    for _ in range(draws):
        point = _random_point(config, rng, multivariate=True)
        p2p = point.copy()
        p2p.theta = None
        a = metrics.rate_shared(0, 0, point, channels, MODE_MULTIVARIATE)
        b = metrics.rate_shared(0, 0, p2p, channels, MODE_P2P)
        if abs(a - b) > 1e-12 * max(abs(b), 1.0):
            return "multivariate-reduction", False, f"{a} != {b} at theta=0"
        joint = metrics.multivariate_joint_rate(0, point, config)
        marg = (metrics.fronthaul_rate(0, 0, metrics.SHARED, point, config)
                + metrics.backhaul_rate(0, 0, point, config))
        if abs(joint - marg) > 1e-12 * max(abs(marg), 1.0):
            return "multivariate-reduction", False, f"joint {joint} != marginal {marg}"
    return "multivariate-reduction", True, f"{draws} draws, identities hold at theta=0"


def check_determinism(seed: int = 3) -> tuple:
    config = NetworkConfig.symmetric(snr_db=10).rescaled(1e6)
    a = sample_channels(config, seed)
    b = sample_channels(config, seed)
    for i in range(2):
        for k in range(config.n_ues):
            for j in range(2):
                for r in range(config.n_rus):
                    if not np.array_equal(a.h[i][k][j][r], b.h[i][k][j][r]):
                        return "determinism", False, "channel redraw differs"
    opts = solver.CccpOptions(max_iter=3, restarts=1, seed=seed)
    s1 = solver.cccp(a, config, options=opts, scheme=dcp.SCHEME_EQUAL)
    s2 = solver.cccp(b, config, options=opts, scheme=dcp.SCHEME_EQUAL)
    if s1.objective_trace != s2.objective_trace:
        return "determinism", False, "CCCP trace differs between identical runs"
    return "determinism", True, "channels and short CCCP runs reproduce exactly"


def check_end_to_end(seed: int = 4) -> tuple:
    config = NetworkConfig.symmetric(snr_db=10).rescaled(1e6)
    channels = sample_channels(config, seed)
    opts = solver.CccpOptions(max_iter=30, restarts=1, seed=seed)
    sol = solver.cccp(channels, config, options=opts)
    if sol.status == solver.STATUS_SOLVER_FAILURE:
        return "end-to-end", False, "solver failure on a nominal scenario"
    mono = all(b >= a - 1e-6 * max(abs(a), 1.0)
               for a, b in zip(sol.objective_trace, sol.objective_trace[1:]))
    if not mono:
        return "end-to-end", False, "objective trace not nondecreasing"
    worst = sol.report.worst
    if worst[1] > 1e-5:
        return "end-to-end", False, f"solution infeasible: {worst[0]} = {worst[1]:.2e}"
    return "end-to-end", True, (f"objective {sol.objective:.3f} Mbit/s in "
                                f"{sol.iterations} iterations, worst residual "
                                f"{worst[1]:+.1e}")


ALL_CHECKS = (check_linearizations, check_hat_bounds, check_multivariate_reduction,
              check_determinism, check_end_to_end)


def run_checks(stream=None) -> bool:
    import sys
    stream = stream or sys.stdout
    ok_all = True
    for fn in ALL_CHECKS:
        name, ok, detail = fn()
        stream.write(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}\n")
        ok_all &= ok
    return ok_all
