"""Direct Clarabel lowering of the ConvexSubproblem IR.

The cvxpy backend is the readable reference adapter, but its canonicalization
costs two orders of magnitude more than the actual interior-point solve at
this problem scale.  This module lowers the four IR constraint kinds straight
to Clarabel's conic form:

* affine rows go to the zero / nonnegative cones;
* each ``ln`` of a scalar variable gets one shared exponential-cone epigraph;
* Hermitian matrix expressions are embedded as real symmetric
  ``[[Re M, -Im M], [Im M, Re M]]`` blocks (PSD triangle cone, upper triangle
  column-major with sqrt(2)-scaled off-diagonals);
* ``ln det`` hypographs use the standard triangular-factor certificate
  [[D, Z], [Z^T, diag(Z)]] >= 0 with sum(ln Z_ii) epigraphs, noting
  ln det T(M) = 2 ln det M for the real embedding.

Hermitian variables are flattened into d^2 real components (diagonal, then
upper-triangle real/imag pairs); the complex cross-covariance into 2 n m.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

try:
    import clarabel
except ImportError:  # pragma: no cover
    clarabel = None

from .dcp import (
    ConvexSubproblem,
    LinearConstraint,
    LinExpr,
    LogDetConstraint,
    LogSumConstraint,
    MatExpr,
    PsdConstraint,
    constraint_violation,
)
from .errors import SubproblemError

_SQRT2 = np.sqrt(2.0)


def _herm_components(d):
    """Fixed component order of a d x d Hermitian matrix: diag, then (re, im)
    per upper-triangle entry in column-major order."""
    comps = [("d", p, p) for p in range(d)]
    for q in range(d):
        for p in range(q):
            comps.append(("u", p, q))
            comps.append(("w", p, q))
    return comps


def _herm_basis(kind, p, q, d):
    e = np.zeros((d, d), dtype=complex)
    if kind == "d":
        e[p, p] = 1.0
    elif kind == "u":
        e[p, q] = 1.0
        e[q, p] = 1.0
    else:
        e[p, q] = 1.0j
        e[q, p] = -1.0j
    return e


def _complex_components(rows, cols):
    comps = []
    for q in range(cols):
        for p in range(rows):
            comps.append(("re", p, q))
            comps.append(("im", p, q))
    return comps


def _complex_basis(kind, p, q, rows, cols):
    e = np.zeros((rows, cols), dtype=complex)
    e[p, q] = 1.0 if kind == "re" else 1.0j
    return e


def _embed(mat: np.ndarray) -> np.ndarray:
    """Real symmetric embedding of a Hermitian matrix."""
    re, im = mat.real, mat.imag
    return np.block([[re, -im], [im, re]])


def _svec(mat: np.ndarray):
    """Clarabel PSD-triangle packing of a real symmetric matrix."""
    t = mat.shape[0]
    out = np.empty(t * (t + 1) // 2)
    idx = 0
    for j in range(t):
        for i in range(j + 1):
            out[idx] = mat[i, j] * (_SQRT2 if i != j else 1.0)
            idx += 1
    return out


class _Assembler:
    """Row/column bookkeeping for one subproblem."""

    def __init__(self, sub: ConvexSubproblem):
        self.cols = {}
        self.n = 0
        self.herm = {}
        self.shapes = {}
        for v in sub.scalar_vars:
            self.cols[v.name] = self.n
            self.n += 1
        for v in sub.matrix_vars:
            self.cols[v.name] = self.n
            self.herm[v.name] = v.hermitian
            self.shapes[v.name] = (v.rows, v.cols)
            self.n += v.rows * v.rows if v.hermitian else 2 * v.rows * v.cols
        # rows per cone family, each row a (coef dict, rhs) pair
        self.zero = []
        self.nonneg = []
        self.exp = []      # flat list of rows, length divisible by 3
        self.psd = []      # list of (dim, rows)
        self._log_epi = {}  # scalar var name -> aux column with y <= ln(var)

    def new_col(self) -> int:
        self.n += 1
        return self.n - 1

    # -- affine scalar rows -------------------------------------------------

    def lin_row(self, expr: LinExpr):
        """(coef dict over columns, constant) for an IR affine scalar."""
        coefs = {}
        const = float(expr.const)
        for name, c in expr.lin.items():
            col = self.cols[name]
            coefs[col] = coefs.get(col, 0.0) + float(c)
        for name, cmat in expr.traces.items():
            base = self.cols[name]
            if self.herm[name]:
                d = self.shapes[name][0]
                for off, (kind, p, q) in enumerate(_herm_components(d)):
                    if kind == "d":
                        val = cmat[p, p].real
                    elif kind == "u":
                        val = 2.0 * cmat[q, p].real
                    else:
                        val = -2.0 * cmat[q, p].imag
                    if val != 0.0:
                        coefs[base + off] = coefs.get(base + off, 0.0) + val
            else:
                rows, cols = self.shapes[name]
                for off, (kind, p, q) in enumerate(_complex_components(rows, cols)):
                    val = cmat[q, p].real if kind == "re" else -cmat[q, p].imag
                    if val != 0.0:
                        coefs[base + off] = coefs.get(base + off, 0.0) + val
        return coefs, const

    # -- affine matrix expressions -------------------------------------------

    def mat_columns(self, expr: MatExpr):
        """(constant matrix, [(column, dM/dcolumn)]) of a Hermitian affine map."""
        grads = []
        for t in expr.terms:
            base = self.cols[t.var]
            d = self.shapes[t.var][0]
            for off, (kind, p, q) in enumerate(_herm_components(d)):
                grads.append((base + off,
                              t.left @ _herm_basis(kind, p, q, d) @ t.left.conj().T))
        for pair in expr.pairs:
            base = self.cols[pair.var]
            rows, cols = self.shapes[pair.var]
            for off, (kind, p, q) in enumerate(_complex_components(rows, cols)):
                cross = pair.left @ _complex_basis(kind, p, q, rows, cols) \
                    @ pair.right.conj().T
                grads.append((base + off, cross + cross.conj().T))
        return np.asarray(expr.const, dtype=complex), grads

    def scalar_entry(self, expr: MatExpr):
        """Affine (coefs, const) of M(x)[0, 0] for a 1 x 1 matrix expression."""
        const, grads = self.mat_columns(expr)
        coefs = {}
        for col, g in grads:
            val = g[0, 0].real
            if val != 0.0:
                coefs[col] = coefs.get(col, 0.0) + val
        return coefs, const[0, 0].real

    # -- cone emitters --------------------------------------------------------

    def add_zero(self, coefs, const):
        self.zero.append((coefs, -const))          # a.x + c = 0  ->  a.x = -c

    def add_nonneg_le(self, coefs, const):
        self.nonneg.append((coefs, -const))        # a.x + c <= 0

    def add_lower_bound(self, name, lower):
        self.nonneg.append(({self.cols[name]: -1.0}, -float(lower)))  # x >= lower

    def add_exp(self, x_row, y_row, z_row):
        """(x, y, z) in K_exp; each row is (coefs, const) meaning coefs.x + const."""
        for coefs, const in (x_row, y_row, z_row):
            self.exp.append(({c: -v for c, v in coefs.items()}, const))

    def log_epigraph(self, name) -> int:
        """Column of an auxiliary y with y <= ln(var), shared across rows."""
        if name not in self._log_epi:
            y = self.new_col()
            self._log_epi[name] = y
            self.add_exp(({y: 1.0}, 0.0), ({}, 1.0), ({self.cols[name]: 1.0}, 0.0))
        return self._log_epi[name]

    def scalar_log_hypograph(self, coefs, const) -> int:
        """Column of y with y <= ln(affine scalar)."""
        y = self.new_col()
        self.add_exp(({y: 1.0}, 0.0), ({}, 1.0), (coefs, const))
        return y

    def add_psd(self, const, grads, dim, floor_rows=None):
        """svec(embed(M(x))) in the PSD triangle cone of size 2*dim."""
        emb_dim = 2 * dim
        rows = []
        c_emb = _svec(_embed(const))
        g_embs = [(col, _svec(_embed(g))) for col, g in grads]
        for idx in range(emb_dim * (emb_dim + 1) // 2):
            coefs = {}
            for col, vec in g_embs:
                if vec[idx] != 0.0:
                    coefs[col] = coefs.get(col, 0.0) - vec[idx]
            rows.append((coefs, c_emb[idx]))
        self.psd.append((emb_dim, rows))

    def logdet_hypograph(self, expr: MatExpr):
        """Columns y_i and scale so that scale * sum(y_i) <= ln det M(x)."""
        const, grads = self.mat_columns(expr)
        t = 2 * expr.dim
        z_cols = {}
        for j in range(t):
            for i in range(j + 1):
                z_cols[(i, j)] = self.new_col()
        # [[D, Z], [Z^T, diag Z]] >= 0 over the embedded D
        big = 2 * t
        rows = []
        c_emb = _embed(const)
        g_embs = [(col, _embed(g)) for col, g in grads]
        for j in range(big):
            for i in range(j + 1):
                scale = _SQRT2 if i != j else 1.0
                coefs = {}
                cval = 0.0
                if i < t and j < t:
                    cval = c_emb[i, j]
                    for col, g in g_embs:
                        if g[i, j] != 0.0:
                            coefs[col] = coefs.get(col, 0.0) - g[i, j]
                elif i < t <= j:
                    if i <= j - t:   # below Z's diagonal is structurally zero
                        coefs[z_cols[(i, j - t)]] = -1.0
                elif i == j:
                    coefs[z_cols[(i - t, j - t)]] = -1.0
                if coefs or cval:
                    coefs = {c: v * scale for c, v in coefs.items()}
                rows.append((coefs, cval * scale))
        self.psd.append((big, rows))
        ys = []
        for i in range(t):
            y = self.new_col()
            self.add_exp(({y: 1.0}, 0.0), ({}, 1.0), ({z_cols[(i, i)]: 1.0}, 0.0))
            ys.append(y)
        return ys, 0.5   # ln det embed = 2 ln det M

    # -- final assembly --------------------------------------------------------

    def build(self, objective_coefs):
        rows = (list(self.zero) + list(self.nonneg) + list(self.exp)
                + [row for _, block in self.psd for row in block])
        data, ridx, cidx, b = [], [], [], []
        for r, (coefs, rhs) in enumerate(rows):
            b.append(rhs)
            for col, val in coefs.items():
                ridx.append(r)
                cidx.append(col)
                data.append(val)
        a = sp.csc_matrix((data, (ridx, cidx)), shape=(len(rows), self.n))
        q = np.zeros(self.n)
        for col, val in objective_coefs.items():
            q[col] = -val   # Clarabel minimizes
        cones = []
        if self.zero:
            cones.append(clarabel.ZeroConeT(len(self.zero)))
        if self.nonneg:
            cones.append(clarabel.NonnegativeConeT(len(self.nonneg)))
        for _ in range(len(self.exp) // 3):
            cones.append(clarabel.ExponentialConeT())
        for dim, _ in self.psd:
            cones.append(clarabel.PSDTriangleConeT(dim))
        return a, np.asarray(b), q, cones


class ClarabelBackend:
    """solve_subproblem adapter that bypasses cvxpy entirely.

    ``fallback`` (another backend, typically :class:`CvxpyBackend`) is tried
    when Clarabel does not reach an (almost) solved status.
    """

    def __init__(self, fallback=None, verbose: bool = False, max_iter: int = 200,
                 check_tol: float | None = 1e-4):
        if clarabel is None:  # pragma: no cover
            raise ImportError("clarabel is not installed")
        self.fallback = fallback
        self.verbose = verbose
        self.max_iter = max_iter
        self.check_tol = check_tol

    def _solve_direct(self, sub: ConvexSubproblem, tolerance) -> dict:
        asm = _Assembler(sub)
        for v in sub.scalar_vars:
            asm.add_lower_bound(v.name, v.lower)
        for cid, con in sub.constraints:
            if isinstance(con, LinearConstraint):
                coefs, const = asm.lin_row(con.expr)
                if con.sense == "eq":
                    asm.add_zero(coefs, const)
                else:
                    asm.add_nonneg_le(coefs, const)
            elif isinstance(con, LogSumConstraint):
                coefs, const = asm.lin_row(con.lhs)
                for name in con.log_vars:
                    y = asm.log_epigraph(name)
                    coefs[y] = coefs.get(y, 0.0) - 1.0
                asm.add_nonneg_le(coefs, const)
            elif isinstance(con, LogDetConstraint):
                coefs, const = asm.lin_row(con.lhs)
                if con.mat.dim == 1:
                    mcoefs, mconst = asm.scalar_entry(con.mat)
                    y = asm.scalar_log_hypograph(mcoefs, mconst)
                    coefs[y] = coefs.get(y, 0.0) - con.coeff
                else:
                    ys, half = asm.logdet_hypograph(con.mat)
                    for y in ys:
                        coefs[y] = coefs.get(y, 0.0) - con.coeff * half
                asm.add_nonneg_le(coefs, const)
            elif isinstance(con, PsdConstraint):
                if con.mat.dim == 1:
                    mcoefs, mconst = asm.scalar_entry(con.mat)
                    asm.add_nonneg_le({c: -v for c, v in mcoefs.items()}, -mconst)
                else:
                    const, grads = asm.mat_columns(con.mat)
                    asm.add_psd(const, grads, con.mat.dim)
            else:
                raise TypeError(f"unknown constraint type {type(con).__name__}")

        obj_coefs, _ = asm.lin_row(sub.objective)
        a, b, q, cones = asm.build(obj_coefs)
        settings = clarabel.DefaultSettings()
        settings.verbose = self.verbose
        settings.max_iter = self.max_iter
        if tolerance is not None:
            settings.tol_gap_abs = tolerance
            settings.tol_gap_rel = tolerance
            settings.tol_feas = tolerance
        solver = clarabel.DefaultSolver(sp.csc_matrix((asm.n, asm.n)), q, a, b,
                                        cones, settings)
        sol = solver.solve()
        status = str(sol.status)
        if status not in ("Solved", "AlmostSolved"):
            raise SubproblemError(status)
        x = np.asarray(sol.x)

        assignment = {}
        for v in sub.scalar_vars:
            assignment[v.name] = max(float(x[asm.cols[v.name]]), v.lower)
        for v in sub.matrix_vars:
            base = asm.cols[v.name]
            if v.hermitian:
                mat = np.zeros((v.rows, v.rows), dtype=complex)
                for off, (kind, p, q_) in enumerate(_herm_components(v.rows)):
                    val = x[base + off]
                    if kind == "d":
                        mat[p, p] += val
                    elif kind == "u":
                        mat[p, q_] += val
                        mat[q_, p] += val
                    else:
                        mat[p, q_] += 1j * val
                        mat[q_, p] += -1j * val
            else:
                mat = np.zeros((v.rows, v.cols), dtype=complex)
                for off, (kind, p, q_) in enumerate(_complex_components(v.rows, v.cols)):
                    mat[p, q_] += x[base + off] * (1.0 if kind == "re" else 1.0j)
            assignment[v.name] = mat
        if self.check_tol is not None:
            worst, cid = constraint_violation(sub, assignment)
            if worst > self.check_tol:
                raise SubproblemError("violated_solution", f"{cid} off by {worst:.2e}",
                                      kind="violated")
        return assignment

    def solve(self, sub: ConvexSubproblem, tolerance: float | None = None) -> dict:
        try:
            return self._solve_direct(sub, tolerance)
        except SubproblemError as exc:
            # a verified-violating solution marks pathologically conditioned
            # data; a different solver rarely passes verification either, so
            # only solver-status failures escalate
            if self.fallback is None or exc.kind == "violated":
                raise
            return self.fallback.solve(sub, tolerance)
