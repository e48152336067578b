"""CCCP driver: feasible initialization, subproblem adapter, outer loop, rank projection.

The convex iterates are handed to a pluggable backend through
:func:`solve_subproblem`; any solver that supports affine constraints, logs of
affine scalars, log-dets of affine Hermitian expressions and the PSD cone can
sit behind that interface.  The bundled backend lowers the IR to cvxpy.
Because one CCCP run solves the same constraint *structure* repeatedly (only
the linearization payloads move), the backend compiles a parameterized model
once per structure signature and reuses it across iterations, restarts and
privacy-threshold sweep cells; a plain rebuild-per-call mode is kept for
reference and cross-checking.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np

from . import dcp
from .dcp import (
    EPS_T,
    ConvexSubproblem,
    ExpansionPoint,
    LinearConstraint,
    LinExpr,
    LogDetConstraint,
    LogSumConstraint,
    MatExpr,
    PsdConstraint,
    SCHEME_EQUAL,
    SCHEME_NO_POOLING,
    SCHEME_OPTIMIZED,
    assignment_from_expansion,
    build_subproblem,
    constraint_violation,
    eps_quant,
    expansion_from_assignment,
)
from .errors import InitializationError, SubproblemError
from .metrics import (
    MODE_MULTIVARIATE,
    MODE_P2P,
    PRIVATE,
    SHARED,
    ConstraintReport,
    DesignPoint,
    achievable_rates,
    backhaul_rate,
    evaluate_constraints,
    fronthaul_rate,
    power_per_hz,
    privacy_leakage,
    rate_private,
    rate_shared,
)
from .model import ChannelRealization, NetworkConfig, complex_gaussian, other

STATUS_CONVERGED = "converged"
STATUS_ITER_LIMIT = "iterLimit"
STATUS_SOLVER_FAILURE = "solverFailure"

# residual ids the rank-projection repair must restore (rate rows are restored
# exactly by recomputing the rates afterwards)
_CAPACITY_PREFIXES = ("fronthaul", "backhaul", "privacy", "power", "multivariate")


@dataclass(frozen=True)
class CccpOptions:
    max_iter: int = 100
    rel_tol: float = 1e-4
    restarts: int = 5
    solver_tolerance: float = 1e-8
    seed: int = 0
    verbose: bool = False

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be > 0")


@dataclass
class Solution:
    """Converged design: projected point, lifted point, traces and diagnostics."""

    point: DesignPoint
    lifted_point: DesignPoint
    objective: float            # achieved sum rate after projection + repair
    lifted_objective: float     # final CCCP iterate objective (rank-relaxed)
    objective_trace: list
    status: str
    report: ConstraintReport
    per_ue_rate: float
    secrecy_rate: float
    iterations: int
    expansion: ExpansionPoint | None = None   # final iterate, reusable as a warm seed
    scheme: str = SCHEME_OPTIMIZED
    mode: str = MODE_P2P


# ---------------------------------------------------------------------------
# cvxpy backend


class _Compiled:
    """A lowered subproblem with its payload parameter slots in traversal order."""

    def __init__(self, problem, variables, slots):
        self.problem = problem
        self.variables = variables
        self.slots = slots


def _payload_values(sub: ConvexSubproblem):
    """Iteration-varying numbers of the IR, in a fixed traversal order."""
    out = []
    herm = {v.name: v.hermitian for v in sub.matrix_vars}

    def lin(expr: LinExpr):
        out.append(float(expr.const))
        for c in expr.lin.values():
            out.append(float(c))
        for name, c in expr.traces.items():
            out.append(0.5 * (c + c.conj().T) if herm[name] else np.asarray(c))

    for _, con in sub.constraints:
        if isinstance(con, LinearConstraint):
            lin(con.expr)
        elif isinstance(con, LogSumConstraint):
            lin(con.lhs)
        elif isinstance(con, LogDetConstraint):
            lin(con.lhs)
    lin(sub.objective)
    return out


class CvxpyBackend:
    """Lowers ConvexSubproblem IRs to cvxpy and solves them.

    parameterize=True compiles one parameterized model per structure signature
    (payloads become cvxpy Parameters); False rebuilds the model on every call.
    Instances are not re-entrant (the compiled-model cache and its parameters
    are mutated per solve); use one backend per worker, as the sweep harness
    does.
    """

    def __init__(self, solver: str = "CLARABEL", parameterize: bool = True,
                 verbose: bool = False, max_cache: int = 8,
                 fallback: str | None = "SCS", check_tol: float | None = 1e-4):
        self.solver = solver
        self.parameterize = parameterize
        self.verbose = verbose
        self.max_cache = max_cache
        self.fallback = fallback if fallback != solver else None
        self.check_tol = check_tol
        self._cache = {}

    # -- lowering ----------------------------------------------------------

    def _lower(self, sub: ConvexSubproblem, parameterize: bool) -> _Compiled:
        """Lower the IR to cvxpy.

        1x1 matrix variables are represented as real (or complex, for the
        cross-covariance) scalars so that single-antenna scenarios avoid the
        far more expensive hermitian-matrix/log_det canonicalization; the
        1x1 matrix shape is restored when the assignment is decoded.
        """
        variables = {}
        herm = {}
        scalar1 = {}   # matrix vars lowered as cvxpy scalars
        for v in sub.scalar_vars:
            variables[v.name] = cp.Variable(nonneg=True, name=v.name)
        for v in sub.matrix_vars:
            herm[v.name] = v.hermitian
            scalar1[v.name] = v.rows == 1 and v.cols == 1
            if scalar1[v.name]:
                variables[v.name] = cp.Variable(name=v.name,
                                                complex=not v.hermitian)
            elif v.hermitian:
                variables[v.name] = cp.Variable((v.rows, v.cols), hermitian=True,
                                                name=v.name)
            else:
                variables[v.name] = cp.Variable((v.rows, v.cols), complex=True,
                                                name=v.name)
        slots = []

        def take_scalar(value):
            if parameterize:
                p = cp.Parameter()
                p.value = float(value)
                slots.append(p)
                return p
            return float(value)

        def take_matrix(value, hermitian):
            if hermitian:
                value = 0.5 * (value + value.conj().T)
                attrs = {"hermitian": True}
            else:
                value = np.asarray(value, dtype=complex)
                attrs = {"complex": True}
            if parameterize:
                p = cp.Parameter(value.shape, **attrs)
                p.value = value
                slots.append(p)
                return p
            return value

        def lower_lin(expr: LinExpr):
            acc = take_scalar(expr.const)
            for name, coef in expr.lin.items():
                acc = acc + take_scalar(coef) * variables[name]
            for name, c in expr.traces.items():
                cmat = take_matrix(c, herm[name])
                if scalar1[name]:
                    acc = acc + cp.real(cmat[0, 0] * variables[name])
                else:
                    acc = acc + cp.real(cp.trace(cmat @ variables[name]))
            return acc

        def lower_mat(expr: MatExpr):
            acc = cp.Constant(expr.const)
            for t in expr.terms:
                if scalar1[t.var]:
                    acc = acc + variables[t.var] * cp.Constant(t.left @ t.left.conj().T)
                else:
                    acc = acc + t.left @ variables[t.var] @ t.left.conj().T
            for p in expr.pairs:
                if scalar1[p.var]:
                    cross = variables[p.var] * cp.Constant(p.left @ p.right.conj().T)
                else:
                    cross = p.left @ variables[p.var] @ p.right.conj().T
                acc = acc + cross + cp.conj(cross).T
            return acc

        constraints = []
        for v in sub.scalar_vars:
            if v.lower > 0:
                constraints.append(variables[v.name] >= v.lower)
        for _, con in sub.constraints:
            if isinstance(con, LinearConstraint):
                expr = lower_lin(con.expr)
                constraints.append(expr == 0 if con.sense == "eq" else expr <= 0)
            elif isinstance(con, LogSumConstraint):
                rhs = sum(cp.log(variables[name]) for name in con.log_vars)
                constraints.append(lower_lin(con.lhs) <= rhs)
            elif isinstance(con, LogDetConstraint):
                mat = lower_mat(con.mat)
                if con.mat.dim == 1:
                    rhs = con.coeff * cp.log(cp.real(mat[0, 0]))
                else:
                    rhs = con.coeff * cp.log_det(mat)
                constraints.append(lower_lin(con.lhs) <= rhs)
            elif isinstance(con, PsdConstraint):
                mat = lower_mat(con.mat)
                if con.mat.dim == 1:
                    constraints.append(cp.real(mat[0, 0]) >= 0)
                else:
                    constraints.append(mat >> 0)
            else:
                raise TypeError(f"unknown constraint type {type(con).__name__}")

        problem = cp.Problem(cp.Maximize(lower_lin(sub.objective)), constraints)
        return _Compiled(problem, variables, slots)

    # -- solving -----------------------------------------------------------

    @staticmethod
    def _solver_args(solver: str, tolerance):
        if tolerance is None:
            return {}
        if solver == "CLARABEL":
            return {"tol_gap_abs": tolerance, "tol_gap_rel": tolerance,
                    "tol_feas": tolerance}
        if solver == "SCS":
            return {"eps": max(tolerance, 1e-9)}
        return {}

    def _solve_with(self, compiled: _Compiled, solver: str, tolerance):
        try:
            with warnings.catch_warnings():
                # cvxpy's complex2real pass warns on its own 1x1 hermitian
                # handling; inaccurate statuses are handled explicitly below
                warnings.filterwarnings("ignore", message=".*nested list.*")
                warnings.filterwarnings("ignore", message=".*inaccurate.*")
                compiled.problem.solve(solver=getattr(cp, solver),
                                       verbose=self.verbose,
                                       **self._solver_args(solver, tolerance))
        except cp.SolverError as exc:
            raise SubproblemError("solver_error", str(exc)) from exc
        status = compiled.problem.status
        if status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
            raise SubproblemError(status)

    def solve(self, sub: ConvexSubproblem, tolerance: float | None = None) -> dict:
        """Solve one subproblem; returns the variable assignment by name.

        Failures of the primary solver are retried once on the fallback
        solver; a non-optimal status from both is raised as
        :class:`SubproblemError` with the solver status preserved verbatim.
        """
        if self.parameterize:
            sig = sub.structure_signature()
            compiled = self._cache.get(sig)
            if compiled is None:
                compiled = self._lower(sub, parameterize=True)
                if len(self._cache) >= self.max_cache:
                    self._cache.pop(next(iter(self._cache)))
                self._cache[sig] = compiled
            else:
                for slot, value in zip(compiled.slots, _payload_values(sub)):
                    slot.value = value
        else:
            compiled = self._lower(sub, parameterize=False)

        def attempt(solver_name, tol):
            self._solve_with(compiled, solver_name, tol)
            assignment = {}
            for v in sub.scalar_vars:
                assignment[v.name] = max(float(compiled.variables[v.name].value),
                                         v.lower)
            for v in sub.matrix_vars:
                val = np.atleast_2d(np.asarray(compiled.variables[v.name].value))
                if v.hermitian:
                    val = 0.5 * (val + val.conj().T)
                assignment[v.name] = val
            if self.check_tol is not None:
                worst, cid = constraint_violation(sub, assignment)
                if worst > self.check_tol:
                    raise SubproblemError("violated_solution",
                                          f"{cid} off by {worst:.2e}",
                                          kind="violated")
            return assignment

        try:
            return attempt(self.solver, tolerance)
        except SubproblemError as exc:
            if self.fallback is None or exc.kind == "violated":
                raise
            # the fallback exists to keep the outer loop moving when the
            # primary solver stalls near a boundary; moderate accuracy is
            # enough since the next primary solve re-polishes
            return attempt(self.fallback,
                           max(tolerance if tolerance else 1e-8, 1e-7))


def default_backend():
    """Direct Clarabel lowering with the cvxpy chain as robustness fallback."""
    try:
        from .conic import ClarabelBackend
        return ClarabelBackend(fallback=CvxpyBackend())
    except ImportError:  # pragma: no cover
        return CvxpyBackend()


def solve_subproblem(sub: ConvexSubproblem, tolerance: float | None = None,
                     backend=None) -> dict:
    """One-shot subproblem solve through a fresh (or given) backend."""
    return (backend or default_backend()).solve(sub, tolerance)


# ---------------------------------------------------------------------------
# feasible initialization


def _capacity_utilization(point: DesignPoint, channels: ChannelRealization,
                          config: NetworkConfig, mode: str):
    """max over capacity-type constraints of load/limit, plus the argmax id."""
    report = evaluate_constraints(point, channels, config, mode)
    worst_id, worst = None, -math.inf
    for cid, resid in report.residuals.items():
        if cid.startswith(_CAPACITY_PREFIXES):
            if resid + 1.0 > worst:
                worst = resid + 1.0
                worst_id = cid
    return worst, worst_id


def _scaled_point(base: DesignPoint, s: float) -> DesignPoint:
    point = base.copy()
    for i in range(2):
        point.vtil[i] = [s * m for m in base.vtil[i]]
        point.util[i] = [s * m for m in base.util[i]]
    return point


def initialize_feasible(channels: ChannelRealization, config: NetworkConfig,
                        mode: str = MODE_P2P, scheme: str = SCHEME_OPTIMIZED,
                        seed: int = 0, utilization: float = 0.9) -> ExpansionPoint:
    """Strictly feasible starting point for Algorithm-style iteration.

    Bandwidths are the scheme's natural split; quantization covariances start
    at a small multiple of the per-Hz power scale; random rank-d precoder
    covariances are scaled by bisection so that every capacity-type constraint
    is loaded at most ``utilization``; rates start at 0.9x achievable.
    """
    rng = np.random.Generator(np.random.Philox(key=seed & 0xFFFFFFFFFFFFFFFF))
    shared = scheme != SCHEME_NO_POOLING
    mv = shared and mode == MODE_MULTIVARIATE
    delta = 1e-2 * config.power_scale()
    base = DesignPoint.zeros(config, quant_floor=delta, multivariate=mv)
    if shared:
        base.wp = [config.total_bandwidth / 3.0] * 2
        base.ws = config.total_bandwidth / 3.0
    else:
        base.wp = [config.total_bandwidth / 2.0] * 2
        base.ws = 0.0

    scale = config.power_scale() / config.n_ues
    for i in range(2):
        for k in range(config.n_ues):
            x = complex_gaussian(rng, config.n_ant_op(i), config.stream_dim_private[i][k])
            v = x @ x.conj().T
            base.vtil[i][k] = scale * v / max(np.trace(v).real, 1e-300)
            if shared:
                y = complex_gaussian(rng, config.stacked_dim(i),
                                     config.stream_dim_shared[i][k])
                u = y @ y.conj().T
                base.util[i][k] = scale * u / max(np.trace(u).real, 1e-300)

    util0, worst_id = _capacity_utilization(base, channels, config,
                                            mode if shared else MODE_P2P)
    zero_util, zero_id = _capacity_utilization(_scaled_point(base, 0.0), channels,
                                               config, mode if shared else MODE_P2P)
    if zero_util > utilization:
        raise InitializationError(
            f"cannot reach strict feasibility: constraint {zero_id} is loaded at "
            f"{zero_util:.3f} with zero precoders")

    s_hi = 1.0
    while util0 <= utilization and s_hi < 2.0 ** 20:
        s_hi *= 2.0
        util0, _ = _capacity_utilization(_scaled_point(base, s_hi), channels, config,
                                         mode if shared else MODE_P2P)
    lo, hi = 0.0, s_hi
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        util, _ = _capacity_utilization(_scaled_point(base, mid), channels, config,
                                        mode if shared else MODE_P2P)
        if util <= utilization:
            lo = mid
        else:
            hi = mid
    point = _scaled_point(base, lo)

    for i in range(2):
        for k in range(config.n_ues):
            point.rp[i][k] = 0.9 * point.wp[i] * rate_private(i, k, point, channels)
            if shared:
                point.rs[i][k] = 0.9 * point.ws * rate_shared(i, k, point, channels, mode)
            else:
                point.rs[i][k] = 0.0

    def per_ru(fun):
        return [[max(fun(i, r), EPS_T) for r in range(config.n_rus)] for i in range(2)]

    return ExpansionPoint(
        point=point,
        tg_p=per_ru(lambda i, r: fronthaul_rate(i, r, PRIVATE, point, config)),
        tg_s=per_ru(lambda i, r: fronthaul_rate(i, r, SHARED, point, config)),
        tgam=per_ru(lambda i, r: backhaul_rate(other(i), r, point, config)),
        tbeta=[[max(privacy_leakage(i, k, point, config), EPS_T)
                for k in range(config.n_ues)] for i in range(2)],
        tp_p=per_ru(lambda i, r: power_per_hz(i, r, PRIVATE, point, config)),
        tp_s=per_ru(lambda i, r: power_per_hz(i, r, SHARED, point, config)),
    )


# ---------------------------------------------------------------------------
# rank projection and feasibility repair


def rank_project(lifted: np.ndarray, d: int) -> np.ndarray:
    """n x d factor from the top-d eigenpairs, columns scaled by sqrt(eigenvalue).

    Eigenvalues descend; near-equal eigenvalues (within 1e-10 of the largest)
    are ordered by lexicographic comparison of their phase-normalized
    eigenvectors, so the output is deterministic under degeneracy.
    """
    lifted = np.atleast_2d(np.asarray(lifted, dtype=complex))
    n = lifted.shape[0]
    if d < 1 or d > n:
        raise ValueError(f"rank {d} out of range for a {n}x{n} matrix")
    vals, vecs = np.linalg.eigh(0.5 * (lifted + lifted.conj().T))
    vals = np.maximum(vals[::-1], 0.0)
    vecs = vecs[:, ::-1]

    def normalize(vec):
        idx = np.argmax(np.abs(vec))
        phase = vec[idx] / max(abs(vec[idx]), 1e-300)
        return vec / phase if abs(vec[idx]) > 0 else vec

    vecs = np.stack([normalize(vecs[:, j]) for j in range(n)], axis=1)
    tol = 1e-10 * max(vals[0], 1.0)
    order = sorted(range(n), key=lambda j: (
        -round(vals[j] / tol) if tol > 0 else 0,
        tuple((vecs[m, j].real, vecs[m, j].imag) for m in range(n))))
    factor = np.zeros((n, d), dtype=complex)
    for col, j in enumerate(order[:d]):
        factor[:, col] = np.sqrt(vals[j]) * vecs[:, j]
    return factor


def _project_point(point: DesignPoint, config: NetworkConfig) -> DesignPoint:
    out = point.copy()
    for i in range(2):
        for k in range(config.n_ues):
            f = rank_project(point.vtil[i][k], config.stream_dim_private[i][k])
            out.vtil[i][k] = f @ f.conj().T
            f = rank_project(point.util[i][k], config.stream_dim_shared[i][k])
            out.util[i][k] = f @ f.conj().T
    return out


def _repair_point(point: DesignPoint, channels: ChannelRealization,
                  config: NetworkConfig, mode: str) -> DesignPoint:
    """Scale precoder covariances down by the smallest factor restoring feasibility."""
    wsum = point.wp[0] + point.wp[1] + point.ws
    if wsum > 0:
        ratio = config.total_bandwidth / wsum
        point = point.copy()
        point.wp = [w * ratio for w in point.wp]
        point.ws *= ratio

    def worst_cap(p):
        report = evaluate_constraints(p, channels, config, mode)
        return max(v for c, v in report.residuals.items()
                   if c.startswith(_CAPACITY_PREFIXES))

    if worst_cap(point) <= 0.0:
        return point
    lo, hi = 0.0, 1.0
    if worst_cap(_scaled_point(point, 0.0)) > 0.0:
        # quantization floors alone violate a capacity: nothing to scale away
        return point
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        if worst_cap(_scaled_point(point, mid)) <= 0.0:
            lo = mid
        else:
            hi = mid
    return _scaled_point(point, lo)


# ---------------------------------------------------------------------------
# CCCP outer loop


@dataclass
class _RunResult:
    trace: list = field(default_factory=list)
    expansion: ExpansionPoint | None = None
    status: str = STATUS_SOLVER_FAILURE
    failure: str = ""


def _run_one(expansion: ExpansionPoint, channels: ChannelRealization,
             config: NetworkConfig, mode: str, scheme: str, options: CccpOptions,
             backend, theta_frozen: bool, echo_seed: bool = False) -> _RunResult:
    result = _RunResult(expansion=expansion)
    prev = None
    for it in range(options.max_iter):
        sub = build_subproblem(expansion, channels, config, mode, scheme, theta_frozen)
        try:
            asg = backend.solve(sub, options.solver_tolerance)
        except SubproblemError as exc:
            if result.trace:
                # keep the last verified iterate
                result.status = STATUS_ITER_LIMIT
                result.failure = str(exc)
                return result
            if echo_seed:
                # an externally seeded restart whose very first solve fails
                # still carries its (feasible) seed point; echo it so best-of
                # keeps it instead of losing a known-good solution
                result.trace = [expansion.point.objective()]
                result.status = STATUS_ITER_LIMIT
                result.failure = str(exc)
                return result
            result.failure = str(exc)
            return result
        obj = sub.objective.value(asg)
        if prev is not None and obj < prev - 1e-9 * max(abs(prev), 1.0):
            # exact solves cannot decrease the objective; a dip is solver
            # noise at the plateau, so keep the previous accepted iterate
            result.status = STATUS_CONVERGED
            return result
        result.trace.append(obj)
        expansion = expansion_from_assignment(asg, config, mode, scheme, theta_frozen)
        result.expansion = expansion
        if options.verbose:
            report = evaluate_constraints(expansion.point, channels, config,
                                          mode if scheme != SCHEME_NO_POOLING else MODE_P2P)
            print(f"iter {it:3d}  objective {obj:.6e}  worst "
                  f"{report.worst[1]:+.2e} ({report.worst[0]})  status optimal")
        if prev is not None and abs(obj - prev) <= options.rel_tol * max(abs(prev), 1e-12):
            result.status = STATUS_CONVERGED
            return result
        prev = obj
    result.status = STATUS_ITER_LIMIT
    return result


def cccp(channels: ChannelRealization, config: NetworkConfig, mode: str = MODE_P2P,
         scheme: str = SCHEME_OPTIMIZED, options: CccpOptions = CccpOptions(),
         backend=None, seed_expansions=(),
         theta_frozen: bool = False) -> Solution:
    """Best-of-restarts CCCP for the given scenario, scheme and compression mode.

    For the optimized-bandwidth scheme one restart is always seeded from an
    equal-split baseline solution (computed internally unless a seed expansion
    is supplied), which guarantees objective(optimized) >= objective(equal)
    up to solver tolerance.  Returns the best run, rank-projected, repaired
    and re-evaluated with exact rates.
    """
    backend = backend or default_backend()
    eval_mode = mode if scheme != SCHEME_NO_POOLING else MODE_P2P

    expansions = [(exp, True) for exp in seed_expansions]
    if scheme == SCHEME_OPTIMIZED and not expansions:
        equal = cccp(channels, config, mode, SCHEME_EQUAL, options, backend,
                     theta_frozen=theta_frozen)
        if equal.expansion is not None:
            expansions.append((equal.expansion, True))
    idx = 0
    while len(expansions) < max(options.restarts, 1):
        try:
            expansions.append((initialize_feasible(
                channels, config, mode, scheme,
                seed=options.seed * 1_000_003 + 7919 * idx), False))
        except InitializationError:
            if idx == 0 and not expansions:
                raise
        idx += 1
        if idx > 4 * max(options.restarts, 1):
            break

    runs, failures = [], []
    for exp, seeded in expansions:
        run = _run_one(exp, channels, config, mode, scheme, options, backend,
                       theta_frozen, echo_seed=seeded)
        (runs if run.trace else failures).append(run)

    if not runs:
        detail = "; ".join(r.failure for r in failures) or "no feasible initialization"
        empty = DesignPoint.zeros(config, quant_floor=eps_quant(config),
                                  multivariate=eval_mode == MODE_MULTIVARIATE)
        report = evaluate_constraints(empty, channels, config, eval_mode)
        return Solution(point=empty, lifted_point=empty, objective=0.0,
                        lifted_objective=0.0, objective_trace=[],
                        status=STATUS_SOLVER_FAILURE, report=report,
                        per_ue_rate=0.0, secrecy_rate=0.0, iterations=0,
                        expansion=None, scheme=scheme, mode=eval_mode)

    best = max(runs, key=lambda r: r.trace[-1])
    lifted = best.expansion.point
    projected = _project_point(lifted, config)
    repaired = _repair_point(projected, channels, config, eval_mode)
    if scheme == SCHEME_EQUAL:
        repaired.wp = [config.total_bandwidth / 3.0] * 2
        repaired.ws = config.total_bandwidth / 3.0
    elif scheme == SCHEME_NO_POOLING:
        repaired.wp = [config.total_bandwidth / 2.0] * 2
        repaired.ws = 0.0
    rp, rs = achievable_rates(repaired, channels, eval_mode)
    repaired.rp, repaired.rs = rp, rs
    report = evaluate_constraints(repaired, channels, config, eval_mode)
    objective = repaired.objective()
    per_ue = objective / (2.0 * config.n_ues)
    return Solution(
        point=repaired, lifted_point=lifted, objective=objective,
        lifted_objective=best.trace[-1], objective_trace=best.trace,
        status=best.status, report=report, per_ue_rate=per_ue,
        secrecy_rate=max(per_ue - config.privacy_threshold, 0.0),
        iterations=len(best.trace), expansion=best.expansion,
        scheme=scheme, mode=eval_mode)
