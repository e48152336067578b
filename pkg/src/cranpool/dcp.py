"""DC reformulation machinery: linearizations, hat-functions and the convex subproblem IR.

One outer iteration of the concave-convex procedure replaces every
non-convexity-inducing term of the rank-relaxed design problem by its
first-order expansion around the previous iterate:

* ``ln x`` on the small side of an inequality becomes ``scalar_phi(x, x0)``;
* ``ln det X`` on the small side becomes ``matrix_phi(X, X0)``;
* achievable-rate functionals keep their exact concave log-det and linearize
  the interference/quantization denominator (concave minorant ``f_hat``);
* compression/leakage functionals linearize their numerator log-det and keep
  the exact convex ``-ln det`` term (convex majorants ``g_hat`` etc.).

The resulting subproblem is emitted as a solver-agnostic IR
(:class:`ConvexSubproblem`) built from two affine expression types over named
variables.  Each constraint kind is convex by construction, so the IR carries
its convexity certificate.  Natural logs are used on both sides of every
epigraph constraint; functional values are converted to bits by 1/ln 2
factors where they represent rates.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, SingularMatrixError, UnsupportedModeError
from .metrics import LN2, MODE_MULTIVARIATE, MODE_P2P, DesignPoint
from .model import ChannelRealization, NetworkConfig, other, selection_matrix

SCHEME_OPTIMIZED = "optimized"
SCHEME_EQUAL = "equal"
SCHEME_NO_POOLING = "noPooling"
SCHEMES = (SCHEME_OPTIMIZED, SCHEME_EQUAL, SCHEME_NO_POOLING)

# Variable floors, spec'd for MHz/Mbit-scaled configs: per-Hz epigraph
# variables are unit-free, bandwidth/rate floors scale with the config.
EPS_T = 1e-6


def eps_rate(config: NetworkConfig) -> float:
    return 1e-7 * config.total_bandwidth


def eps_quant(config: NetworkConfig) -> float:
    """PSD floor for quantization covariances: 1e-8 x per-Hz power scale."""
    return 1e-8 * config.power_scale()


# ---------------------------------------------------------------------------
# scalar / matrix linearizations


def scalar_phi(x, x0: float):
    """First-order upper bound of ln x at x0: ln x0 + (x - x0)/x0."""
    if not x0 > 0:
        raise ValueError(f"expansion point must be > 0, got {x0}")
    return np.log(x0) + (x - x0) / x0


def matrix_phi(a: np.ndarray, a0: np.ndarray) -> float:
    """First-order upper bound of ln det A at A0: ln det A0 + tr(A0^-1 (A - A0))."""
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    a0 = np.atleast_2d(np.asarray(a0, dtype=complex))
    if a.shape != a0.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {a0.shape}")
    sign, logdet = np.linalg.slogdet(a0)
    if sign.real <= 0 or not np.isfinite(logdet):
        raise SingularMatrixError("expansion matrix is not positive definite")
    return float(logdet + np.trace(np.linalg.solve(a0, a - a0)).real)


# ---------------------------------------------------------------------------
# affine expressions over named variables


@dataclass
class LinExpr:
    """const + sum(coef * scalar var) + sum(Re tr(C @ matrix var))."""

    const: float = 0.0
    lin: dict = field(default_factory=dict)     # name -> float
    traces: dict = field(default_factory=dict)  # name -> complex hermitian ndarray

    def add_lin(self, name: str, coef: float) -> "LinExpr":
        self.lin[name] = self.lin.get(name, 0.0) + coef
        return self

    def add_trace(self, name: str, c: np.ndarray) -> "LinExpr":
        if name in self.traces:
            self.traces[name] = self.traces[name] + c
        else:
            self.traces[name] = np.array(c, dtype=complex)
        return self

    def __iadd__(self, rhs: "LinExpr") -> "LinExpr":
        self.const += rhs.const
        for name, coef in rhs.lin.items():
            self.add_lin(name, coef)
        for name, c in rhs.traces.items():
            self.add_trace(name, c)
        return self

    def value(self, assignment: dict) -> float:
        out = self.const
        for name, coef in self.lin.items():
            out += coef * assignment[name]
        for name, c in self.traces.items():
            out += float(np.trace(c @ assignment[name]).real)
        return out


@dataclass
class MatTerm:
    """Congruence term L @ X @ L^H of a Hermitian variable X."""

    var: str
    left: np.ndarray


@dataclass
class PairTerm:
    """L @ T @ R^H + R @ T^H @ L^H for a general complex variable T."""

    var: str
    left: np.ndarray
    right: np.ndarray


@dataclass
class MatExpr:
    """Hermitian-valued affine matrix expression: const + congruences + pair terms."""

    dim: int
    const: np.ndarray = None
    terms: list = field(default_factory=list)   # [MatTerm]
    pairs: list = field(default_factory=list)   # [PairTerm]

    def __post_init__(self):
        if self.const is None:
            self.const = np.zeros((self.dim, self.dim), dtype=complex)

    def add(self, var: str, left: np.ndarray) -> "MatExpr":
        self.terms.append(MatTerm(var, np.asarray(left, dtype=complex)))
        return self

    def add_pair(self, var: str, left: np.ndarray, right: np.ndarray) -> "MatExpr":
        self.pairs.append(PairTerm(var, np.asarray(left, dtype=complex),
                                   np.asarray(right, dtype=complex)))
        return self

    def value(self, assignment: dict) -> np.ndarray:
        out = self.const.astype(complex).copy()
        for t in self.terms:
            out += t.left @ assignment[t.var] @ t.left.conj().T
        for p in self.pairs:
            cross = p.left @ assignment[p.var] @ p.right.conj().T
            out += cross + cross.conj().T
        return out


def phi_lin_expr(expr: MatExpr, a0: np.ndarray, scale: float) -> LinExpr:
    """scale * matrix_phi(expr, A0) as an affine expression in expr's variables.

    tr(A0^-1 L X L^H) = tr((L^H A0^-1 L) X), so a congruence term contributes a
    Hermitian trace coefficient; a pair term contributes
    tr(A0^-1 (L T R^H + R T^H L^H)) = Re tr((2 R^H A0^-1 L) T).
    """
    sign, logdet = np.linalg.slogdet(a0)
    if sign.real <= 0 or not np.isfinite(logdet):
        raise SingularMatrixError("expansion matrix is not positive definite")
    a0_inv = np.linalg.inv(a0)
    a0_inv = 0.5 * (a0_inv + a0_inv.conj().T)
    out = LinExpr(const=scale * (float(logdet) - expr.dim
                                 + float(np.trace(a0_inv @ expr.const).real)))
    for t in expr.terms:
        c = t.left.conj().T @ a0_inv @ t.left
        out.add_trace(t.var, scale * 0.5 * (c + c.conj().T))
    for p in expr.pairs:
        out.add_trace(p.var, scale * 2.0 * (p.right.conj().T @ a0_inv @ p.left))
    return out


def scalar_phi_expr(name: str, x0: float) -> LinExpr:
    """scalar_phi(var, x0) as an affine expression."""
    if not x0 > 0:
        raise ValueError(f"expansion point for {name} must be > 0, got {x0}")
    return LinExpr(const=float(np.log(x0)) - 1.0, lin={name: 1.0 / x0})


# ---------------------------------------------------------------------------
# IR: variables, constraints, subproblem


@dataclass(frozen=True)
class ScalarVar:
    name: str
    lower: float = 0.0


@dataclass(frozen=True)
class MatrixVar:
    name: str
    rows: int
    cols: int
    hermitian: bool = True  # False only for the multivariate cross-covariance


@dataclass
class LinearConstraint:
    """expr == 0 (sense 'eq') or expr <= 0 (sense 'le')."""

    expr: LinExpr
    sense: str = "le"


@dataclass
class LogSumConstraint:
    """lhs <= sum(ln(scalar var)); the logs enforce positivity of their arguments."""

    lhs: LinExpr
    log_vars: tuple


@dataclass
class LogDetConstraint:
    """lhs <= coeff * ln det(mat); convex because coeff > 0 and mat is affine."""

    lhs: LinExpr
    coeff: float
    mat: MatExpr

    def __post_init__(self):
        if not self.coeff > 0:
            raise ValueError("log-det coefficient must be positive")


@dataclass
class PsdConstraint:
    """mat >= 0 in the PSD order (floors folded into the constant block)."""

    mat: MatExpr


@dataclass
class ConvexSubproblem:
    """Solver-agnostic IR of one convexified CCCP iterate."""

    scalar_vars: list          # [ScalarVar]
    matrix_vars: list          # [MatrixVar]
    constraints: list          # [(cid, constraint)]
    objective: LinExpr         # maximized
    mode: str = MODE_P2P
    scheme: str = SCHEME_OPTIMIZED
    theta_frozen: bool = False

    def var_names(self):
        return [v.name for v in self.scalar_vars] + [v.name for v in self.matrix_vars]

    def describe(self) -> str:
        """Human-readable variable and constraint listing for debugging/diffing."""
        lines = [f"subproblem scheme={self.scheme} mode={self.mode} "
                 f"theta_frozen={self.theta_frozen}",
                 f"scalar variables ({len(self.scalar_vars)}):"]
        for v in self.scalar_vars:
            lines.append(f"  {v.name} >= {v.lower:g}")
        lines.append(f"matrix variables ({len(self.matrix_vars)}):")
        for v in self.matrix_vars:
            kind = "hermitian" if v.hermitian else "complex"
            lines.append(f"  {v.name} {kind} {v.rows}x{v.cols}")
        lines.append(f"constraints ({len(self.constraints)}):")
        for cid, con in self.constraints:
            if isinstance(con, LinearConstraint):
                lines.append(f"  {cid}: affine {con.sense} [{_fmt_lin(con.expr)}]")
            elif isinstance(con, LogSumConstraint):
                logs = " + ".join(f"ln({v})" for v in con.log_vars)
                lines.append(f"  {cid}: [{_fmt_lin(con.lhs)}] <= {logs}")
            elif isinstance(con, LogDetConstraint):
                mats = ", ".join(t.var for t in con.mat.terms)
                lines.append(f"  {cid}: [{_fmt_lin(con.lhs)}] <= "
                             f"{con.coeff:.6g}*lndet({mats})")
            elif isinstance(con, PsdConstraint):
                mats = ", ".join([t.var for t in con.mat.terms]
                                 + [p.var for p in con.mat.pairs])
                lines.append(f"  {cid}: psd({mats})")
        lines.append(f"objective: maximize [{_fmt_lin(self.objective)}]")
        return "\n".join(lines)

    def structure_signature(self) -> str:
        """Hash of everything except the iteration-varying affine payloads.

        Two subproblems with equal signatures differ only in LinExpr constants,
        scalar coefficients and trace-coefficient values (same keys, same
        order), so a compiled parameterized model can be reused across CCCP
        iterations and privacy-threshold sweep cells.
        """
        h = hashlib.sha256()

        def feed(*items):
            for it in items:
                if isinstance(it, np.ndarray):
                    h.update(np.ascontiguousarray(it).tobytes())
                else:
                    h.update(str(it).encode())
                h.update(b"|")

        for v in self.scalar_vars:
            feed("s", v.name, v.lower)
        for v in self.matrix_vars:
            feed("m", v.name, v.rows, v.cols, v.hermitian)

        def feed_lin(expr: LinExpr):
            feed("lin", tuple(expr.lin.keys()))
            for name, c in expr.traces.items():
                feed("tr", name, c.shape)

        def feed_mat(expr: MatExpr):
            feed("matexpr", expr.dim, expr.const)
            for t in expr.terms:
                feed(t.var, t.left)
            for p in expr.pairs:
                feed(p.var, p.left, p.right)

        for cid, con in self.constraints:
            feed("c", cid, type(con).__name__)
            if isinstance(con, LinearConstraint):
                feed(con.sense)
                feed_lin(con.expr)
            elif isinstance(con, LogSumConstraint):
                feed(con.log_vars)
                feed_lin(con.lhs)
            elif isinstance(con, LogDetConstraint):
                feed(con.coeff)
                feed_lin(con.lhs)
                feed_mat(con.mat)
            elif isinstance(con, PsdConstraint):
                feed_mat(con.mat)
        feed_lin(self.objective)
        return h.hexdigest()


def constraint_violation(sub: ConvexSubproblem, assignment: dict):
    """(worst violation, constraint id) of an assignment, in IR units.

    Used by backends to reject 'optimal' statuses whose solutions do not
    actually satisfy the subproblem: near the quantization PSD floors the
    linearization coefficients grow like 1/eps and badly scaled rows can slip
    through solver feasibility tolerances.
    """
    worst, worst_id = -np.inf, None
    for cid, con in sub.constraints:
        if isinstance(con, LinearConstraint):
            val = con.expr.value(assignment)
            v = abs(val) if con.sense == "eq" else val
        elif isinstance(con, LogSumConstraint):
            rhs = sum(np.log(max(assignment[name], 1e-300)) for name in con.log_vars)
            v = con.lhs.value(assignment) - rhs
        elif isinstance(con, LogDetConstraint):
            sign, logdet = np.linalg.slogdet(con.mat.value(assignment))
            if sign.real <= 0:
                v = np.inf
            else:
                v = con.lhs.value(assignment) - con.coeff * logdet
        elif isinstance(con, PsdConstraint):
            v = -float(np.linalg.eigvalsh(con.mat.value(assignment)).min())
        else:  # pragma: no cover
            raise TypeError(type(con).__name__)
        if v > worst:
            worst, worst_id = v, cid
    return worst, worst_id


def _fmt_lin(expr: LinExpr) -> str:
    parts = [f"{expr.const:.6g}"]
    parts += [f"{c:+.6g}*{n}" for n, c in expr.lin.items()]
    parts += [f"+tr(C*{n})" for n in expr.traces.keys()]
    return " ".join(parts)


# ---------------------------------------------------------------------------
# expansion point and variable naming


@dataclass
class ExpansionPoint:
    """Previous-iterate values of every linearized quantity.

    ``point`` carries the primed covariances, bandwidths and rates; the t
    arrays carry the primed per-Hz epigraph values for the fronthaul (tg),
    cross-link (tgam), privacy (tbeta) and power (tp) constraints.  All stored
    values must be strictly positive wherever they are linearized.
    """

    point: DesignPoint
    tg_p: list     # [i][r]
    tg_s: list
    tgam: list     # [i][r]  (destination RU (i, r))
    tbeta: list    # [i][k]
    tp_p: list     # [i][r]
    tp_s: list


def _w_name(i=None):
    return "W_S" if i is None else f"W_P_{i}"


def var_layout(config: NetworkConfig, mode: str, scheme: str, theta_frozen: bool = False):
    """Declared scalar and matrix variables for the given structure."""
    shared = scheme != SCHEME_NO_POOLING
    er, et = eps_rate(config), EPS_T
    svars, mvars = [], []
    svars += [ScalarVar(_w_name(i), er) for i in range(2)]
    if shared:
        svars.append(ScalarVar(_w_name(), er))
    for i in range(2):
        for k in range(config.n_ues):
            svars.append(ScalarVar(f"R_P_{i}_{k}", er))
            svars.append(ScalarVar(f"tf_P_{i}_{k}", et))
            if shared:
                svars.append(ScalarVar(f"R_S_{i}_{k}", er))
                svars.append(ScalarVar(f"tf_S_{i}_{k}", et))
                svars.append(ScalarVar(f"tbeta_{i}_{k}", et))
    for i in range(2):
        for r in range(config.n_rus):
            svars.append(ScalarVar(f"tg_P_{i}_{r}", et))
            svars.append(ScalarVar(f"tp_P_{i}_{r}", et))
            svars.append(ScalarVar(f"gb_P_{i}_{r}", 0.0))
            svars.append(ScalarVar(f"pb_P_{i}_{r}", 0.0))
            if shared:
                svars.append(ScalarVar(f"tg_S_{i}_{r}", et))
                svars.append(ScalarVar(f"tgam_{i}_{r}", et))
                svars.append(ScalarVar(f"tp_S_{i}_{r}", et))
                svars.append(ScalarVar(f"gb_S_{i}_{r}", 0.0))
                svars.append(ScalarVar(f"cb_{i}_{r}", 0.0))
                svars.append(ScalarVar(f"pb_S_{i}_{r}", 0.0))
    for i in range(2):
        for k in range(config.n_ues):
            mvars.append(MatrixVar(f"V_{i}_{k}", config.n_ant_op(i), config.n_ant_op(i)))
            if shared:
                d = config.stacked_dim(i)
                mvars.append(MatrixVar(f"U_{i}_{k}", d, d))
    for i in range(2):
        for r in range(config.n_rus):
            n = config.n_ant_ru[i][r]
            mvars.append(MatrixVar(f"OmP_{i}_{r}", n, n))
            if shared:
                mvars.append(MatrixVar(f"OmS_{i}_{r}", n, n))
                mvars.append(MatrixVar(f"Sig_{i}_{r}", n, n))
    if shared and mode == MODE_MULTIVARIATE and not theta_frozen:
        for i in range(2):
            mvars.append(MatrixVar(f"Th_{i}", config.n_ant_ru[i][0],
                                   config.n_ant_ru[other(i)][0], hermitian=False))
    return svars, mvars


def assignment_from_point(point: DesignPoint, config: NetworkConfig, mode: str,
                          scheme: str, theta_frozen: bool = False) -> dict:
    """Map a DesignPoint onto the IR variable names (no epigraph t's)."""
    shared = scheme != SCHEME_NO_POOLING
    asg = {}
    for i in range(2):
        asg[_w_name(i)] = point.wp[i]
        for k in range(config.n_ues):
            asg[f"R_P_{i}_{k}"] = point.rp[i][k]
            asg[f"V_{i}_{k}"] = point.vtil[i][k]
            if shared:
                asg[f"R_S_{i}_{k}"] = point.rs[i][k]
                asg[f"U_{i}_{k}"] = point.util[i][k]
        for r in range(config.n_rus):
            asg[f"OmP_{i}_{r}"] = point.omega_p[i][r]
            if shared:
                asg[f"OmS_{i}_{r}"] = point.omega_s[i][r]
                asg[f"Sig_{i}_{r}"] = point.sigma[i][r]
        if shared and mode == MODE_MULTIVARIATE and not theta_frozen:
            asg[f"Th_{i}"] = point.theta[i]
    if shared:
        asg[_w_name()] = point.ws
    return asg


def assignment_from_expansion(exp: ExpansionPoint, config: NetworkConfig, mode: str,
                              scheme: str, theta_frozen: bool = False) -> dict:
    asg = assignment_from_point(exp.point, config, mode, scheme, theta_frozen)
    shared = scheme != SCHEME_NO_POOLING
    # rates are linearization points here and must be strictly positive even
    # when the point carries exact zero rates (degenerate channels)
    er = eps_rate(config)
    for i in range(2):
        for k in range(config.n_ues):
            asg[f"R_P_{i}_{k}"] = max(asg[f"R_P_{i}_{k}"], er)
            if shared:
                asg[f"R_S_{i}_{k}"] = max(asg[f"R_S_{i}_{k}"], er)
    for i in range(2):
        for r in range(config.n_rus):
            asg[f"tg_P_{i}_{r}"] = exp.tg_p[i][r]
            asg[f"tp_P_{i}_{r}"] = exp.tp_p[i][r]
            if shared:
                asg[f"tg_S_{i}_{r}"] = exp.tg_s[i][r]
                asg[f"tgam_{i}_{r}"] = exp.tgam[i][r]
                asg[f"tp_S_{i}_{r}"] = exp.tp_s[i][r]
        if shared:
            for k in range(config.n_ues):
                asg[f"tbeta_{i}_{k}"] = exp.tbeta[i][k]
    return asg


# ---------------------------------------------------------------------------
# matrix-expression assembly (shared by the builder and the numeric hats)


def _private_total_expr(i: int, k: int, channels: ChannelRealization) -> MatExpr:
    """I + sum_l H V_l H^H + H Omega_P H^H at UE (i,k)."""
    cfg = channels.config
    n = cfg.n_ant_ue[i][k]
    h = channels.h_op(i, k, i)
    expr = MatExpr(dim=n, const=np.eye(n, dtype=complex))
    for l in range(cfg.n_ues):
        expr.add(f"V_{i}_{l}", h)
    for r in range(cfg.n_rus):
        expr.add(f"OmP_{i}_{r}", channels.h[i][k][i][r])
    return expr


def _private_noise_expr(i: int, k: int, channels: ChannelRealization) -> MatExpr:
    expr = _private_total_expr(i, k, channels)
    expr.terms = [t for t in expr.terms if t.var != f"V_{i}_{k}"]
    return expr


def _shared_total_expr(i: int, k: int, channels: ChannelRealization, mode: str,
                       theta_frozen: bool = False) -> MatExpr:
    """I + all shared-band signal and quantization covariances at UE (i,k)."""
    cfg = channels.config
    n = cfg.n_ant_ue[i][k]
    expr = MatExpr(dim=n, const=np.eye(n, dtype=complex))
    for j in range(2):
        g = channels.g_op(i, k, j)
        for l in range(cfg.n_ues):
            expr.add(f"U_{j}_{l}", g)
    for j in range(2):
        h = channels.h_op(i, k, j)
        for r in range(cfg.n_rus):
            expr.add(f"OmS_{j}_{r}", channels.h[i][k][j][r])
            expr.add(f"Sig_{j}_{r}", channels.h[i][k][j][r])
    if mode == MODE_MULTIVARIATE and not theta_frozen:
        # joint quantization by CP j correlates its own fronthaul noise (on
        # operator j's antennas) with the backhaul noise on jbar's antennas
        for j in range(2):
            expr.add_pair(f"Th_{j}", channels.h_op(i, k, j),
                          channels.h_op(i, k, other(j)))
    return expr


def _shared_noise_expr(i: int, k: int, channels: ChannelRealization, mode: str,
                       theta_frozen: bool = False) -> MatExpr:
    expr = _shared_total_expr(i, k, channels, mode, theta_frozen)
    dropped = False
    kept = []
    for t in expr.terms:
        if not dropped and t.var == f"U_{i}_{k}":
            dropped = True
            continue
        kept.append(t)
    expr.terms = kept
    return expr


def _fronthaul_expr(i: int, r: int, band: str, config: NetworkConfig) -> MatExpr:
    """Signal + quantization covariance of the subband-m fronthaul stream of RU (i,r)."""
    n = config.n_ant_ru[i][r]
    expr = MatExpr(dim=n)
    if band == "private":
        e = selection_matrix("E", i, r, config)
        for k in range(config.n_ues):
            expr.add(f"V_{i}_{k}", e.T)
        expr.add(f"OmP_{i}_{r}", np.eye(n))
    else:
        e = selection_matrix("Etil", i, r, config)
        for k in range(config.n_ues):
            expr.add(f"U_{i}_{k}", e.T)
        expr.add(f"OmS_{i}_{r}", np.eye(n))
    return expr


def _backhaul_expr(i_dest: int, r: int, config: NetworkConfig) -> MatExpr:
    """Signal + quantization covariance of the cross stream destined to RU (i_dest, r)."""
    ib = other(i_dest)
    n = config.n_ant_ru[i_dest][r]
    e = selection_matrix("Ebar", ib, r, config)
    expr = MatExpr(dim=n)
    for k in range(config.n_ues):
        expr.add(f"U_{ib}_{k}", e.T)
    expr.add(f"Sig_{i_dest}_{r}", np.eye(n))
    return expr


def _privacy_exprs(i: int, k: int, config: NetworkConfig):
    """(numerator+noise, denominator) of the leakage seen by the other CP."""
    ib = other(i)
    n = config.n_ant_op(ib)
    e = selection_matrix("Ebar_op", i, 0, config)
    num = MatExpr(dim=n)
    den = MatExpr(dim=n)
    for l in range(config.n_ues):
        num.add(f"U_{i}_{l}", e.T)
        if l != k:
            den.add(f"U_{i}_{l}", e.T)
    for r in range(config.n_rus):
        esel = selection_matrix("E", ib, r, config)
        num.add(f"Sig_{ib}_{r}", esel)
        den.add(f"Sig_{ib}_{r}", esel)
    return num, den


def _lam_expr(i: int, config: NetworkConfig, theta_frozen: bool,
              floor: float = 0.0) -> MatExpr:
    """Stacked joint quantization covariance of CP i (multivariate, N_R = 1)."""
    n_i = config.n_ant_ru[i][0]
    n_ib = config.n_ant_ru[other(i)][0]
    dim = n_i + n_ib
    top = np.vstack([np.eye(n_i), np.zeros((n_ib, n_i))])
    bot = np.vstack([np.zeros((n_i, n_ib)), np.eye(n_ib)])
    expr = MatExpr(dim=dim, const=-floor * np.eye(dim, dtype=complex))
    expr.add(f"OmS_{i}_0", top)
    expr.add(f"Sig_{other(i)}_0", bot)
    if not theta_frozen:
        expr.add_pair(f"Th_{i}", top, bot)
    return expr


def _joint_sides_exprs(i: int, config: NetworkConfig):
    """(X + Omega, Y + Sigma): the two marginal covariances CP i jointly quantizes."""
    et = selection_matrix("Etil", i, 0, config)
    eb = selection_matrix("Ebar", i, 0, config)
    x = MatExpr(dim=config.n_ant_ru[i][0])
    y = MatExpr(dim=config.n_ant_ru[other(i)][0])
    for k in range(config.n_ues):
        x.add(f"U_{i}_{k}", et.T)
        y.add(f"U_{i}_{k}", eb.T)
    x.add(f"OmS_{i}_0", np.eye(x.dim))
    y.add(f"Sig_{other(i)}_0", np.eye(y.dim))
    return x, y


# ---------------------------------------------------------------------------
# numeric hat-functions (tangent minorants/majorants evaluated at a point)


def hat_rate_private(i: int, k: int, point: DesignPoint, expansion: ExpansionPoint,
                     channels: ChannelRealization) -> float:
    """Concave minorant of the private spectral efficiency around the expansion."""
    cfg = channels.config
    asg = assignment_from_point(point, cfg, MODE_P2P, SCHEME_OPTIMIZED)
    asg0 = assignment_from_point(expansion.point, cfg, MODE_P2P, SCHEME_OPTIMIZED)
    total = _private_total_expr(i, k, channels)
    noise = _private_noise_expr(i, k, channels)
    sign, logdet = np.linalg.slogdet(total.value(asg))
    return float(logdet) / LN2 - matrix_phi(noise.value(asg), noise.value(asg0)) / LN2


def hat_rate_shared(i: int, k: int, point: DesignPoint, expansion: ExpansionPoint,
                    channels: ChannelRealization, mode: str = MODE_P2P) -> float:
    cfg = channels.config
    frozen = mode == MODE_MULTIVARIATE and point.theta is None
    asg = assignment_from_point(point, cfg, mode, SCHEME_OPTIMIZED, frozen)
    asg0 = assignment_from_point(expansion.point, cfg, mode, SCHEME_OPTIMIZED, frozen)
    total = _shared_total_expr(i, k, channels, mode, frozen)
    noise = _shared_noise_expr(i, k, channels, mode, frozen)
    sign, logdet = np.linalg.slogdet(total.value(asg))
    return float(logdet) / LN2 - matrix_phi(noise.value(asg), noise.value(asg0)) / LN2


def _hat_compression(expr: MatExpr, quant_var: str, point_asg: dict,
                     exp_asg: dict) -> float:
    num = matrix_phi(expr.value(point_asg), expr.value(exp_asg)) / LN2
    sign, logdet = np.linalg.slogdet(point_asg[quant_var])
    if sign.real <= 0:
        raise SingularMatrixError(f"{quant_var} is not positive definite")
    return num - float(logdet) / LN2


def hat_fronthaul(i: int, r: int, band: str, point: DesignPoint,
                  expansion: ExpansionPoint, config: NetworkConfig) -> float:
    """Convex majorant of the fronthaul compression rate."""
    asg = assignment_from_point(point, config, MODE_P2P, SCHEME_OPTIMIZED)
    asg0 = assignment_from_point(expansion.point, config, MODE_P2P, SCHEME_OPTIMIZED)
    expr = _fronthaul_expr(i, r, band, config)
    quant = f"OmP_{i}_{r}" if band == "private" else f"OmS_{i}_{r}"
    return _hat_compression(expr, quant, asg, asg0)


def hat_backhaul(i_sender: int, r: int, point: DesignPoint,
                 expansion: ExpansionPoint, config: NetworkConfig) -> float:
    asg = assignment_from_point(point, config, MODE_P2P, SCHEME_OPTIMIZED)
    asg0 = assignment_from_point(expansion.point, config, MODE_P2P, SCHEME_OPTIMIZED)
    expr = _backhaul_expr(other(i_sender), r, config)
    return _hat_compression(expr, f"Sig_{other(i_sender)}_{r}", asg, asg0)


def hat_privacy(i: int, k: int, point: DesignPoint, expansion: ExpansionPoint,
                config: NetworkConfig) -> float:
    asg = assignment_from_point(point, config, MODE_P2P, SCHEME_OPTIMIZED)
    asg0 = assignment_from_point(expansion.point, config, MODE_P2P, SCHEME_OPTIMIZED)
    num, den = _privacy_exprs(i, k, config)
    val = matrix_phi(num.value(asg), num.value(asg0)) / LN2
    sign, logdet = np.linalg.slogdet(den.value(asg))
    if sign.real <= 0:
        raise SingularMatrixError("privacy denominator is not positive definite")
    return val - float(logdet) / LN2


def hat_joint_rate(i: int, point: DesignPoint, expansion: ExpansionPoint,
                   config: NetworkConfig) -> float:
    """Convex majorant of CP i's joint compression rate (multivariate mode)."""
    frozen = point.theta is None
    asg = assignment_from_point(point, config, MODE_MULTIVARIATE, SCHEME_OPTIMIZED, frozen)
    asg0 = assignment_from_point(expansion.point, config, MODE_MULTIVARIATE,
                                 SCHEME_OPTIMIZED, frozen)
    x, y = _joint_sides_exprs(i, config)
    lam = _lam_expr(i, config, frozen)
    val = (matrix_phi(x.value(asg), x.value(asg0))
           + matrix_phi(y.value(asg), y.value(asg0))) / LN2
    sign, logdet = np.linalg.slogdet(lam.value(asg))
    if sign.real <= 0:
        raise SingularMatrixError("joint quantization covariance is not positive definite")
    return val - float(logdet) / LN2


# ---------------------------------------------------------------------------
# subproblem construction


def build_subproblem(expansion: ExpansionPoint, channels: ChannelRealization,
                     config: NetworkConfig, mode: str = MODE_P2P,
                     scheme: str = SCHEME_OPTIMIZED,
                     theta_frozen: bool = False) -> ConvexSubproblem:
    """Emit the convexified iterate around ``expansion`` as a ConvexSubproblem.

    Every linearization denominator is evaluated at the expansion assignment;
    a non-PD denominator or non-positive primed scalar raises, which is the
    strict-feasibility precondition on the expansion point.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    if mode == MODE_MULTIVARIATE and config.n_rus != 1:
        raise UnsupportedModeError("multivariate compression requires a single RU per operator")
    shared = scheme != SCHEME_NO_POOLING
    mv = shared and mode == MODE_MULTIVARIATE
    frozen = theta_frozen or not mv
    exp_asg = assignment_from_expansion(expansion, config, mode, scheme, frozen)
    eq = eps_quant(config)
    cons = []

    svars, mvars = var_layout(config, mode, scheme, theta_frozen)
    ln2inv = 1.0 / LN2

    def philin(name):
        return scalar_phi_expr(name, exp_asg[name])

    # rate epigraphs and hat-rate constraints
    for i in range(2):
        for k in range(config.n_ues):
            lhs = philin(f"R_P_{i}_{k}")
            cons.append((f"rateP_epi[{i}][{k}]",
                         LogSumConstraint(lhs, (_w_name(i), f"tf_P_{i}_{k}"))))
            noise = _private_noise_expr(i, k, channels)
            total = _private_total_expr(i, k, channels)
            # the -EPS_T slack keeps t feasible when the exact rate is zero
            # (degenerate channels); it inflates rates by at most W*EPS_T
            lhs = LinExpr(const=-EPS_T, lin={f"tf_P_{i}_{k}": 1.0})
            lhs += phi_lin_expr(noise, noise.value(exp_asg), ln2inv)
            cons.append((f"rateP_hat[{i}][{k}]",
                         LogDetConstraint(lhs, ln2inv, total)))
            if shared:
                lhs = philin(f"R_S_{i}_{k}")
                cons.append((f"rateS_epi[{i}][{k}]",
                             LogSumConstraint(lhs, (_w_name(), f"tf_S_{i}_{k}"))))
                noise = _shared_noise_expr(i, k, channels, mode, frozen)
                total = _shared_total_expr(i, k, channels, mode, frozen)
                lhs = LinExpr(const=-EPS_T, lin={f"tf_S_{i}_{k}": 1.0})
                lhs += phi_lin_expr(noise, noise.value(exp_asg), ln2inv)
                cons.append((f"rateS_hat[{i}][{k}]",
                             LogDetConstraint(lhs, ln2inv, total)))

    # fronthaul, cross-link, power
    for i in range(2):
        for r in range(config.n_rus):
            budget = LinExpr(const=-config.fronthaul_capacity[i][r],
                             lin={f"gb_P_{i}_{r}": 1.0})
            if shared:
                budget.add_lin(f"gb_S_{i}_{r}", 1.0)
                budget.add_lin(f"cb_{i}_{r}", 1.0)
            cons.append((f"fronthaul[{i}][{r}]", LinearConstraint(budget)))

            lhs = philin(_w_name(i))
            lhs += philin(f"tg_P_{i}_{r}")
            cons.append((f"fhP_epi[{i}][{r}]",
                         LogSumConstraint(lhs, (f"gb_P_{i}_{r}",))))
            expr = _fronthaul_expr(i, r, "private", config)
            lhs = phi_lin_expr(expr, expr.value(exp_asg), ln2inv)
            lhs.add_lin(f"tg_P_{i}_{r}", -1.0)
            cons.append((f"fhP_hat[{i}][{r}]",
                         LogDetConstraint(lhs, ln2inv,
                                          MatExpr(dim=expr.dim).add(f"OmP_{i}_{r}",
                                                                    np.eye(expr.dim)))))
            if shared:
                lhs = philin(_w_name())
                lhs += philin(f"tg_S_{i}_{r}")
                cons.append((f"fhS_epi[{i}][{r}]",
                             LogSumConstraint(lhs, (f"gb_S_{i}_{r}",))))
                expr = _fronthaul_expr(i, r, "shared", config)
                lhs = phi_lin_expr(expr, expr.value(exp_asg), ln2inv)
                lhs.add_lin(f"tg_S_{i}_{r}", -1.0)
                cons.append((f"fhS_hat[{i}][{r}]",
                             LogDetConstraint(lhs, ln2inv,
                                              MatExpr(dim=expr.dim).add(f"OmS_{i}_{r}",
                                                                        np.eye(expr.dim)))))
                lhs = philin(_w_name())
                lhs += philin(f"tgam_{i}_{r}")
                cons.append((f"cross_epi[{i}][{r}]",
                             LogSumConstraint(lhs, (f"cb_{i}_{r}",))))
                expr = _backhaul_expr(i, r, config)
                lhs = phi_lin_expr(expr, expr.value(exp_asg), ln2inv)
                lhs.add_lin(f"tgam_{i}_{r}", -1.0)
                cons.append((f"cross_hat[{i}][{r}]",
                             LogDetConstraint(lhs, ln2inv,
                                              MatExpr(dim=expr.dim).add(f"Sig_{i}_{r}",
                                                                        np.eye(expr.dim)))))

            pbudget = LinExpr(const=-config.max_power[i][r], lin={f"pb_P_{i}_{r}": 1.0})
            if shared:
                pbudget.add_lin(f"pb_S_{i}_{r}", 1.0)
            cons.append((f"power[{i}][{r}]", LinearConstraint(pbudget)))
            lhs = philin(_w_name(i))
            lhs += philin(f"tp_P_{i}_{r}")
            cons.append((f"pwP_epi[{i}][{r}]",
                         LogSumConstraint(lhs, (f"pb_P_{i}_{r}",))))
            e = selection_matrix("E", i, r, config)
            lhs = LinExpr(lin={f"tp_P_{i}_{r}": -1.0})
            for k in range(config.n_ues):
                lhs.add_trace(f"V_{i}_{k}", e @ e.T)
            lhs.add_trace(f"OmP_{i}_{r}", np.eye(config.n_ant_ru[i][r]))
            cons.append((f"pwP_lin[{i}][{r}]", LinearConstraint(lhs)))
            if shared:
                lhs = philin(_w_name())
                lhs += philin(f"tp_S_{i}_{r}")
                cons.append((f"pwS_epi[{i}][{r}]",
                             LogSumConstraint(lhs, (f"pb_S_{i}_{r}",))))
                et = selection_matrix("Etil", i, r, config)
                eb = selection_matrix("Ebar", other(i), r, config)
                lhs = LinExpr(lin={f"tp_S_{i}_{r}": -1.0})
                for k in range(config.n_ues):
                    lhs.add_trace(f"U_{i}_{k}", et @ et.T)
                    lhs.add_trace(f"U_{other(i)}_{k}", eb @ eb.T)
                lhs.add_trace(f"OmS_{i}_{r}", np.eye(config.n_ant_ru[i][r]))
                lhs.add_trace(f"Sig_{i}_{r}", np.eye(config.n_ant_ru[i][r]))
                cons.append((f"pwS_lin[{i}][{r}]", LinearConstraint(lhs)))

    # backhaul capacity and privacy
    if shared:
        for i in range(2):
            lhs = LinExpr(const=-config.backhaul_capacity[i])
            for r in range(config.n_rus):
                lhs.add_lin(f"cb_{other(i)}_{r}", 1.0)
            cons.append((f"backhaul[{i}]", LinearConstraint(lhs)))
        for i in range(2):
            for k in range(config.n_ues):
                lhs = philin(_w_name())
                lhs += philin(f"tbeta_{i}_{k}")
                lhs.const -= float(np.log(config.privacy_threshold))
                cons.append((f"privacy_epi[{i}][{k}]", LinearConstraint(lhs)))
                num, den = _privacy_exprs(i, k, config)
                lhs = phi_lin_expr(num, num.value(exp_asg), ln2inv)
                lhs.add_lin(f"tbeta_{i}_{k}", -1.0)
                cons.append((f"privacy_hat[{i}][{k}]",
                             LogDetConstraint(lhs, ln2inv, den)))

    # multivariate joint compression rate (Fischer penalty on correlated noises).
    # With theta frozen at zero both rows are implied by the per-link
    # constraints and block floors, so they are omitted and the subproblem is
    # identical to the point-to-point one.
    if mv and not theta_frozen:
        for i in range(2):
            x, y = _joint_sides_exprs(i, config)
            lhs = phi_lin_expr(x, x.value(exp_asg), ln2inv)
            lhs += phi_lin_expr(y, y.value(exp_asg), ln2inv)
            lhs.add_lin(f"tg_S_{i}_0", -1.0)
            lhs.add_lin(f"tgam_{other(i)}_0", -1.0)
            cons.append((f"joint_hat[{i}]",
                         LogDetConstraint(lhs, ln2inv,
                                          _lam_expr(i, config, theta_frozen=False))))
            cons.append((f"lam_psd[{i}]",
                         PsdConstraint(_lam_expr(i, config, theta_frozen=False,
                                                 floor=eq))))

    # bandwidth split
    bw = LinExpr(const=-config.total_bandwidth,
                 lin={_w_name(0): 1.0, _w_name(1): 1.0})
    if shared:
        bw.add_lin(_w_name(), 1.0)
    cons.append(("bandwidth", LinearConstraint(bw, sense="eq")))
    if scheme == SCHEME_EQUAL:
        third = config.total_bandwidth / 3.0
        for name in (_w_name(0), _w_name(1), _w_name()):
            cons.append((f"equal_split[{name}]",
                         LinearConstraint(LinExpr(const=-third, lin={name: 1.0}),
                                          sense="eq")))
    elif scheme == SCHEME_NO_POOLING:
        half = config.total_bandwidth / 2.0
        for name in (_w_name(0), _w_name(1)):
            cons.append((f"half_split[{name}]",
                         LinearConstraint(LinExpr(const=-half, lin={name: 1.0}),
                                          sense="eq")))

    # PSD memberships with epsilon floors on quantization blocks
    for i in range(2):
        for k in range(config.n_ues):
            n = config.n_ant_op(i)
            cons.append((f"psd_V[{i}][{k}]",
                         PsdConstraint(MatExpr(dim=n).add(f"V_{i}_{k}", np.eye(n)))))
            if shared:
                d = config.stacked_dim(i)
                cons.append((f"psd_U[{i}][{k}]",
                             PsdConstraint(MatExpr(dim=d).add(f"U_{i}_{k}", np.eye(d)))))
        for r in range(config.n_rus):
            n = config.n_ant_ru[i][r]
            cons.append((f"psd_OmP[{i}][{r}]",
                         PsdConstraint(MatExpr(dim=n, const=-eq * np.eye(n, dtype=complex))
                                       .add(f"OmP_{i}_{r}", np.eye(n)))))
            if shared:
                cons.append((f"psd_OmS[{i}][{r}]",
                             PsdConstraint(MatExpr(dim=n, const=-eq * np.eye(n, dtype=complex))
                                           .add(f"OmS_{i}_{r}", np.eye(n)))))
                cons.append((f"psd_Sig[{i}][{r}]",
                             PsdConstraint(MatExpr(dim=n, const=-eq * np.eye(n, dtype=complex))
                                           .add(f"Sig_{i}_{r}", np.eye(n)))))

    objective = LinExpr()
    for i in range(2):
        for k in range(config.n_ues):
            objective.add_lin(f"R_P_{i}_{k}", 1.0)
            if shared:
                objective.add_lin(f"R_S_{i}_{k}", 1.0)

    return ConvexSubproblem(scalar_vars=svars, matrix_vars=mvars, constraints=cons,
                            objective=objective, mode=mode if shared else MODE_P2P,
                            scheme=scheme, theta_frozen=theta_frozen)


# ---------------------------------------------------------------------------
# decoding solver assignments back into design/expansion points


def _hermitize(mat) -> np.ndarray:
    m = np.atleast_2d(np.asarray(mat, dtype=complex))
    return 0.5 * (m + m.conj().T)


def _floor_psd(mat, floor: float) -> np.ndarray:
    """Hermitize and push eigenvalues up to ``floor`` (decode-time guard).

    Reduced-accuracy conic solves can return quantization blocks marginally
    below their PSD floor; the next iterate's linearization needs them PD.
    """
    m = _hermitize(mat)
    vals, vecs = np.linalg.eigh(m)
    if vals.min() >= floor:
        return m
    vals = np.maximum(vals, floor)
    return (vecs * vals) @ vecs.conj().T


def point_from_assignment(asg: dict, config: NetworkConfig, mode: str, scheme: str,
                          theta_frozen: bool = False) -> DesignPoint:
    """Rebuild a DesignPoint from a solved variable assignment.

    For the no-pooling scheme the shared-band structure is absent from the
    subproblem; the decoded point carries zero shared covariances with
    epsilon-floored quantization blocks so every functional stays evaluable.
    """
    shared = scheme != SCHEME_NO_POOLING
    eq = eps_quant(config)
    mv = shared and mode == MODE_MULTIVARIATE
    point = DesignPoint.zeros(config, quant_floor=eq, multivariate=mv)
    for i in range(2):
        point.wp[i] = float(asg[_w_name(i)])
        for k in range(config.n_ues):
            point.rp[i][k] = float(asg[f"R_P_{i}_{k}"])
            point.vtil[i][k] = _floor_psd(asg[f"V_{i}_{k}"], 0.0)
            if shared:
                point.rs[i][k] = float(asg[f"R_S_{i}_{k}"])
                point.util[i][k] = _floor_psd(asg[f"U_{i}_{k}"], 0.0)
            else:
                point.rs[i][k] = 0.0
        for r in range(config.n_rus):
            point.omega_p[i][r] = _floor_psd(asg[f"OmP_{i}_{r}"], eq)
            if shared:
                point.omega_s[i][r] = _floor_psd(asg[f"OmS_{i}_{r}"], eq)
                point.sigma[i][r] = _floor_psd(asg[f"Sig_{i}_{r}"], eq)
        if mv:
            if theta_frozen:
                point.theta[i] = np.zeros((config.n_ant_ru[i][0],
                                           config.n_ant_ru[other(i)][0]), dtype=complex)
            else:
                point.theta[i] = np.atleast_2d(np.asarray(asg[f"Th_{i}"], dtype=complex))
    point.ws = float(asg[_w_name()]) if shared else 0.0
    if mv and not theta_frozen:
        # keep the stacked joint covariances strictly PD after the block clamps
        from .metrics import lam_matrix
        for i in range(2):
            for _ in range(200):
                low = float(np.linalg.eigvalsh(lam_matrix(i, point)).min())
                if low >= 0.5 * eq:
                    break
                point.theta[i] = 0.9 * point.theta[i]
    return point


def as_multivariate(exp: ExpansionPoint, config: NetworkConfig) -> ExpansionPoint:
    """Copy of a point-to-point expansion usable as a multivariate seed.

    Zero cross-covariances reproduce the point-to-point functionals exactly,
    so a point-to-point solution is always feasible for the multivariate
    problem; seeding from it makes mode dominance assertable.
    """
    point = exp.point.copy()
    if point.theta is None:
        point.theta = [np.zeros((config.n_ant_ru[i][0], config.n_ant_ru[other(i)][0]),
                                dtype=complex) for i in range(2)]
    return ExpansionPoint(point=point, tg_p=[list(r) for r in exp.tg_p],
                          tg_s=[list(r) for r in exp.tg_s],
                          tgam=[list(r) for r in exp.tgam],
                          tbeta=[list(r) for r in exp.tbeta],
                          tp_p=[list(r) for r in exp.tp_p],
                          tp_s=[list(r) for r in exp.tp_s])


def expansion_from_assignment(asg: dict, config: NetworkConfig, mode: str, scheme: str,
                              theta_frozen: bool = False) -> ExpansionPoint:
    """Next CCCP expansion from a solved assignment; epigraph values floored at EPS_T."""
    shared = scheme != SCHEME_NO_POOLING
    point = point_from_assignment(asg, config, mode, scheme, theta_frozen)

    def grab(fmt, per_ru=True):
        count = config.n_rus if per_ru else config.n_ues
        return [[max(float(asg.get(fmt.format(i=i, j=j), EPS_T)), EPS_T)
                 for j in range(count)] for i in range(2)]

    def floors(per_ru=True):
        count = config.n_rus if per_ru else config.n_ues
        return [[EPS_T] * count for _ in range(2)]

    return ExpansionPoint(
        point=point,
        tg_p=grab("tg_P_{i}_{j}"),
        tg_s=grab("tg_S_{i}_{j}") if shared else floors(),
        tgam=grab("tgam_{i}_{j}") if shared else floors(),
        tbeta=grab("tbeta_{i}_{j}", per_ru=False) if shared else floors(per_ru=False),
        tp_p=grab("tp_P_{i}_{j}"),
        tp_s=grab("tp_S_{i}_{j}") if shared else floors(),
    )
