"""Solver-agnostic conic program representation and pluggable solve backends.

The problem form is

    minimize    c @ x + offset
    subject to  A_eq @ x == b_eq
                A_ineq @ x <= b_ineq
                lower <= x <= upper
                (x[head], x[tail...]) in a second-order cone per SOC tuple
                constant + sum_i x[i] * coeff[i]  PSD per PSD block

Second-order cone memberships are tuples of variable indices meaning
``||x[tail]||_2 <= x[head]``; affine cone arguments are handled by the builder
through auxiliary variables pinned with equality rows.  PSD blocks are
symmetric matrices of affine expressions in x.

Backends are registered by name.  The default backend is Clarabel (supports
PSD); SCS is available as a cross-check.  A backend that cannot handle PSD
cones declares so and callers that need PSD refuse it up front.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import sparse

INF = float("inf")


class ConicError(Exception):
    """Base class for conic-layer failures."""


class BackendCapabilityError(ConicError):
    """Raised when a backend lacks a cone type the program requires."""


@dataclass(frozen=True)
class PsdBlock:
    """Affine-in-x symmetric matrix required to be positive semidefinite."""

    constant: np.ndarray
    coefficients: dict[int, np.ndarray]

    @property
    def order(self) -> int:
        return self.constant.shape[0]

    def materialize(self, x: np.ndarray) -> np.ndarray:
        m = self.constant.copy()
        for i, f in self.coefficients.items():
            m = m + x[i] * f
        return m


@dataclass(frozen=True)
class ConicProgram:
    num_vars: int
    objective: np.ndarray
    offset: float
    a_eq: sparse.csr_matrix
    b_eq: np.ndarray
    a_ineq: sparse.csr_matrix
    b_ineq: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    soc: tuple[tuple[int, ...], ...]
    psd: tuple[PsdBlock, ...]

    def __post_init__(self):
        n = self.num_vars
        for cone in self.soc:
            if len(cone) < 2:
                raise ConicError(f"SOC tuple {cone} must have length >= 2")
            if any(i < 0 or i >= n for i in cone):
                raise ConicError(f"SOC tuple {cone} references an index outside 0..{n - 1}")
        for b, blk in enumerate(self.psd):
            c = blk.constant
            if c.ndim != 2 or c.shape[0] != c.shape[1]:
                raise ConicError(f"PSD block {b} constant is not square")
            if not np.allclose(c, c.T, atol=1e-12):
                raise ConicError(f"PSD block {b} constant is not symmetric")
            for i, f in blk.coefficients.items():
                if i < 0 or i >= n:
                    raise ConicError(f"PSD block {b} references variable {i} outside 0..{n - 1}")
                if f.shape != c.shape or not np.allclose(f, f.T, atol=1e-12):
                    raise ConicError(f"PSD block {b} coefficient for variable {i} is not symmetric/square")

    @property
    def needs_psd(self) -> bool:
        return len(self.psd) > 0


class ProgramBuilder:
    """Incrementally assembles a ConicProgram.

    Rows are given as ``{var_index: coefficient}`` dicts.  ``add_soc`` takes
    plain variable indices; ``add_soc_affine`` accepts affine expressions
    (coeffs, const) and introduces pinned auxiliary variables for them.
    """

    def __init__(self):
        self._lower: list[float] = []
        self._upper: list[float] = []
        self._obj: dict[int, float] = {}
        self._offset = 0.0
        self._eq_rows: list[dict[int, float]] = []
        self._eq_rhs: list[float] = []
        self._ineq_rows: list[dict[int, float]] = []
        self._ineq_rhs: list[float] = []
        self._soc: list[tuple[int, ...]] = []
        self._psd: list[PsdBlock] = []

    @property
    def num_vars(self) -> int:
        return len(self._lower)

    def add_var(self, lb: float = -INF, ub: float = INF) -> int:
        self._lower.append(lb)
        self._upper.append(ub)
        return len(self._lower) - 1

    def add_vars(self, count: int, lb: float = -INF, ub: float = INF) -> np.ndarray:
        return np.array([self.add_var(lb, ub) for _ in range(count)], dtype=int)

    def add_eq(self, coeffs: dict[int, float], rhs: float) -> None:
        self._eq_rows.append(dict(coeffs))
        self._eq_rhs.append(float(rhs))

    def add_ineq(self, coeffs: dict[int, float], rhs: float) -> None:
        """Row sum(c_i * x_i) <= rhs."""
        self._ineq_rows.append(dict(coeffs))
        self._ineq_rhs.append(float(rhs))

    def add_soc(self, head: int, tail) -> None:
        self._soc.append((int(head), *[int(i) for i in tail]))

    def add_soc_affine(self, head: tuple[dict[int, float], float],
                       tail: list[tuple[dict[int, float], float]]) -> None:
        """||tail(x)||_2 <= head(x) for affine arguments (coeffs, const)."""
        ids = []
        for coeffs, const in [head, *tail]:
            aux = self.add_var()
            row = {aux: 1.0}
            for i, v in coeffs.items():
                row[i] = row.get(i, 0.0) - v
            self.add_eq(row, const)
            ids.append(aux)
        self.add_soc(ids[0], ids[1:])

    def add_psd(self, constant: np.ndarray, coefficients: dict[int, np.ndarray]) -> None:
        self._psd.append(PsdBlock(np.asarray(constant, dtype=float),
                                  {int(i): np.asarray(f, dtype=float) for i, f in coefficients.items()}))

    def add_objective(self, coeffs: dict[int, float], offset: float = 0.0) -> None:
        for i, v in coeffs.items():
            self._obj[i] = self._obj.get(i, 0.0) + v
        self._offset += offset

    def add_quadratic_epigraph(self, var: int, coef: float, magnitude: float = 1.0) -> tuple[int, float]:
        """Epigraph of coef * x^2: returns (q_index, unit) with q*unit >= coef*x^2.

        Encoded as the SOC identity ||(sqrt(coef/unit)*x, (q-1)/2)|| <= (q+1)/2
        on the normalized variable q.  Pass ``magnitude`` near the expected
        peak of coef*x^2 so the cone arguments stay O(1).
        """
        if coef < 0:
            raise ConicError("quadratic epigraph requires a nonnegative coefficient")
        unit = max(float(magnitude), 1e-12)
        q = self.add_var(lb=0.0)
        root = math.sqrt(coef / unit)
        self.add_soc_affine(({q: 0.5}, 0.5), [({var: root}, 0.0), ({q: 0.5}, -0.5)])
        return q, unit

    def _rows_to_csr(self, rows, n) -> sparse.csr_matrix:
        data, ri, ci = [], [], []
        for r, row in enumerate(rows):
            for i, v in row.items():
                if v != 0.0:
                    ri.append(r)
                    ci.append(i)
                    data.append(v)
        return sparse.csr_matrix((data, (ri, ci)), shape=(len(rows), n))

    def build(self) -> ConicProgram:
        n = self.num_vars
        c = np.zeros(n)
        for i, v in self._obj.items():
            c[i] = v
        return ConicProgram(
            num_vars=n,
            objective=c,
            offset=self._offset,
            a_eq=self._rows_to_csr(self._eq_rows, n),
            b_eq=np.array(self._eq_rhs, dtype=float),
            a_ineq=self._rows_to_csr(self._ineq_rows, n),
            b_ineq=np.array(self._ineq_rhs, dtype=float),
            lower=np.array(self._lower, dtype=float),
            upper=np.array(self._upper, dtype=float),
            soc=tuple(self._soc),
            psd=tuple(self._psd),
        )


@dataclass(frozen=True)
class SolveSettings:
    backend: str = "clarabel"
    feas_tol: float = 1e-8
    gap_tol: float = 1e-8
    max_iters: int = 200_000
    time_limit: float = 600.0
    verify_tol: float = 1e-6


@dataclass(frozen=True)
class Solution:
    status: str  # optimal | infeasible | unbounded | numerical-limit
    primal: np.ndarray | None
    objective: float | None
    wall_time: float
    iterations: int
    message: str = ""

    def require_optimal(self) -> np.ndarray:
        if self.status != "optimal" or self.primal is None:
            raise ConicError(f"solution status is '{self.status}': {self.message}")
        return self.primal


@dataclass(frozen=True)
class ResidualReport:
    max_eq: float
    max_ineq: float
    max_bound: float
    max_soc: float
    min_psd_eig: float
    worst_label: str
    passed: bool

    @property
    def max_residual(self) -> float:
        return max(self.max_eq, self.max_ineq, self.max_bound, self.max_soc,
                   max(0.0, -self.min_psd_eig))


def verify(program: ConicProgram, primal: np.ndarray, tol: float = 1e-6) -> ResidualReport:
    """Independent residual check of a primal point against every block."""
    x = np.asarray(primal, dtype=float)
    worst = ("", 0.0)

    def track(label, value):
        nonlocal worst
        if value > worst[1]:
            worst = (label, value)

    max_eq = float(np.max(np.abs(program.a_eq @ x - program.b_eq))) if program.b_eq.size else 0.0
    track("equality", max_eq)
    max_ineq = float(np.max(program.a_ineq @ x - program.b_ineq)) if program.b_ineq.size else 0.0
    max_ineq = max(max_ineq, 0.0)
    track("inequality", max_ineq)

    lo_viol = np.where(np.isfinite(program.lower), program.lower - x, 0.0)
    up_viol = np.where(np.isfinite(program.upper), x - program.upper, 0.0)
    max_bound = float(max(np.max(lo_viol, initial=0.0), np.max(up_viol, initial=0.0)))
    track("bound", max_bound)

    max_soc = 0.0
    for cone in program.soc:
        gap = float(np.linalg.norm(x[list(cone[1:])]) - x[cone[0]])
        if gap > max_soc:
            max_soc = gap
    max_soc = max(max_soc, 0.0)
    track("soc", max_soc)

    min_eig = 0.0
    for b, blk in enumerate(program.psd):
        eig = float(np.linalg.eigvalsh(blk.materialize(x))[0])
        if eig < min_eig:
            min_eig = eig
            track(f"psd block {b}", -eig)

    passed = max(max_eq, max_ineq, max_bound, max_soc, -min_eig) <= tol
    return ResidualReport(max_eq=max_eq, max_ineq=max_ineq, max_bound=max_bound,
                          max_soc=max_soc, min_psd_eig=min_eig,
                          worst_label=worst[0], passed=passed)


# ---------------------------------------------------------------------------
# Backend assembly.  Both supported backends take the homogeneous form
# A x + s = b with s in a product of cones ordered zero/nonneg/soc/psd.
# ---------------------------------------------------------------------------

def _svec(mat: np.ndarray, order: str) -> np.ndarray:
    """Scaled triangular vectorization (off-diagonals * sqrt(2)).

    order='upper': upper triangle stacked column-wise (Clarabel).
    order='lower': lower triangle stacked column-wise (SCS).
    """
    n = mat.shape[0]
    r2 = math.sqrt(2.0)
    out = []
    for j in range(n):
        rng = range(j + 1) if order == "upper" else range(j, n)
        for i in rng:
            out.append(mat[i, j] * (r2 if i != j else 1.0))
    return np.array(out)


def _assemble_cone_form(program: ConicProgram, svec_order: str):
    """Returns (A, b, cone_sizes) with rows ordered eq, ineq+bounds, soc, psd."""
    n = program.num_vars
    blocks_a = [program.a_eq]
    blocks_b = [program.b_eq]
    m_eq = program.b_eq.size

    ineq_a = [program.a_ineq]
    ineq_b = [program.b_ineq]
    fin_up = np.where(np.isfinite(program.upper))[0]
    if fin_up.size:
        sel = sparse.csr_matrix((np.ones(fin_up.size), (np.arange(fin_up.size), fin_up)),
                                shape=(fin_up.size, n))
        ineq_a.append(sel)
        ineq_b.append(program.upper[fin_up])
    fin_lo = np.where(np.isfinite(program.lower))[0]
    if fin_lo.size:
        sel = sparse.csr_matrix((-np.ones(fin_lo.size), (np.arange(fin_lo.size), fin_lo)),
                                shape=(fin_lo.size, n))
        ineq_a.append(sel)
        ineq_b.append(-program.lower[fin_lo])
    blocks_a.append(sparse.vstack(ineq_a, format="csr"))
    blocks_b.append(np.concatenate(ineq_b))
    m_ineq = blocks_b[-1].size

    soc_sizes = []
    for cone in program.soc:
        k = len(cone)
        sel = sparse.csr_matrix((-np.ones(k), (np.arange(k), list(cone))), shape=(k, n))
        blocks_a.append(sel)
        blocks_b.append(np.zeros(k))
        soc_sizes.append(k)

    psd_sizes = []
    for blk in program.psd:
        sv_const = _svec(blk.constant, svec_order)
        m = sv_const.size
        data, ri, ci = [], [], []
        for i, f in blk.coefficients.items():
            sv = _svec(f, svec_order)
            nz = np.nonzero(sv)[0]
            ri.extend(nz.tolist())
            ci.extend([i] * nz.size)
            data.extend((-sv[nz]).tolist())
        blocks_a.append(sparse.csr_matrix((data, (ri, ci)), shape=(m, n)))
        blocks_b.append(sv_const)
        psd_sizes.append(blk.order)

    a = sparse.vstack(blocks_a, format="csc")
    b = np.concatenate(blocks_b)
    return a, b, (m_eq, m_ineq, soc_sizes, psd_sizes)


def _solve_clarabel(program: ConicProgram, settings: SolveSettings) -> Solution:
    import clarabel

    a, b, (m_eq, m_ineq, soc_sizes, psd_sizes) = _assemble_cone_form(program, "upper")
    cones = []
    if m_eq:
        cones.append(clarabel.ZeroConeT(m_eq))
    if m_ineq:
        cones.append(clarabel.NonnegativeConeT(m_ineq))
    cones.extend(clarabel.SecondOrderConeT(k) for k in soc_sizes)
    cones.extend(clarabel.PSDTriangleConeT(k) for k in psd_sizes)

    st = clarabel.DefaultSettings()
    st.verbose = False
    st.tol_feas = settings.feas_tol
    st.tol_gap_abs = settings.gap_tol
    st.tol_gap_rel = settings.gap_tol
    st.max_iter = min(settings.max_iters, 2_000_000_000)
    st.time_limit = settings.time_limit

    p_mat = sparse.csc_matrix((program.num_vars, program.num_vars))
    t0 = time.perf_counter()
    solver = clarabel.DefaultSolver(p_mat, program.objective, a, b, cones, st)
    raw = solver.solve()
    wall = time.perf_counter() - t0

    status_name = str(raw.status)
    if status_name in ("SolverStatus.Solved", "Solved"):
        status = "optimal"
    elif "AlmostSolved" in status_name:
        # Reduced-precision certificate; resolved against verify_tol below.
        status = "optimal"
    elif "PrimalInfeasible" in status_name:
        status = "infeasible"
    elif "DualInfeasible" in status_name:
        status = "unbounded"
    else:
        status = "numerical-limit"

    primal = np.asarray(raw.x) if status == "optimal" else None
    objective = float(program.objective @ primal + program.offset) if primal is not None else None
    return Solution(status=status, primal=primal, objective=objective,
                    wall_time=wall, iterations=int(raw.iterations),
                    message=status_name)


def _solve_scs(program: ConicProgram, settings: SolveSettings) -> Solution:
    import scs

    a, b, (m_eq, m_ineq, soc_sizes, psd_sizes) = _assemble_cone_form(program, "lower")
    cone = {}
    if m_eq:
        cone["z"] = m_eq
    if m_ineq:
        cone["l"] = m_ineq
    if soc_sizes:
        cone["q"] = soc_sizes
    if psd_sizes:
        cone["s"] = psd_sizes

    data = dict(A=a, b=b, c=program.objective)
    t0 = time.perf_counter()
    solver = scs.SCS(data, cone, verbose=False,
                     eps_abs=settings.gap_tol, eps_rel=settings.gap_tol,
                     max_iters=min(settings.max_iters, 2_000_000_000),
                     time_limit_secs=settings.time_limit)
    out = solver.solve()
    wall = time.perf_counter() - t0

    raw_status = out["info"]["status"]
    if raw_status in ("solved", "solved (inaccurate - reached max_iters)"):
        status = "optimal" if raw_status == "solved" else "numerical-limit"
    elif "infeasible" in raw_status:
        status = "infeasible"
    elif "unbounded" in raw_status:
        status = "unbounded"
    else:
        status = "numerical-limit"

    primal = np.asarray(out["x"]) if status == "optimal" else None
    objective = float(program.objective @ primal + program.offset) if primal is not None else None
    return Solution(status=status, primal=primal, objective=objective,
                    wall_time=wall, iterations=int(out["info"]["iter"]),
                    message=raw_status)


@dataclass(frozen=True)
class Backend:
    name: str
    supports_psd: bool
    solve_fn: object


_BACKENDS: dict[str, Backend] = {}


def register_backend(backend: Backend) -> None:
    _BACKENDS[backend.name] = backend


def get_backend(name: str) -> Backend:
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ConicError(f"unknown backend '{name}'; available: {sorted(_BACKENDS)}") from None


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


register_backend(Backend("clarabel", supports_psd=True, solve_fn=_solve_clarabel))
register_backend(Backend("scs", supports_psd=True, solve_fn=_solve_scs))


def solve(program: ConicProgram, settings: SolveSettings | None = None) -> Solution:
    """Solve the program; optimal solutions are re-verified before reporting.

    A primal point that fails the residual check at ``settings.verify_tol``
    is downgraded to ``numerical-limit`` so a wrong answer is never silent.
    """
    settings = settings or SolveSettings()
    backend = get_backend(settings.backend)
    if program.needs_psd and not backend.supports_psd:
        raise BackendCapabilityError(
            f"backend '{backend.name}' does not support PSD cones but the program has "
            f"{len(program.psd)} PSD block(s)")
    try:
        solution = backend.solve_fn(program, settings)
    except (BackendCapabilityError, ConicError):
        raise
    except Exception as exc:  # backend failure must not look like an answer
        return Solution(status="numerical-limit", primal=None, objective=None,
                        wall_time=0.0, iterations=0, message=f"backend error: {exc}")
    if solution.status == "optimal":
        report = verify(program, solution.primal, settings.verify_tol)
        if not report.passed:
            return replace(solution, status="numerical-limit",
                           message=f"residual check failed at {settings.verify_tol:g}: "
                                   f"{report.worst_label} = {report.max_residual:.3e}")
    return solution


# ---------------------------------------------------------------------------
# Plain-text dump/load (sparse triplets + cone list) for external cross-checks.
# ---------------------------------------------------------------------------

def _fmt(value) -> str:
    return repr(float(value))


def dump_program(program: ConicProgram) -> str:
    lines = [f"conic-program v1 vars {program.num_vars}"]
    lines.append(f"offset {_fmt(program.offset)}")
    for i in np.nonzero(program.objective)[0]:
        lines.append(f"obj {i} {_fmt(program.objective[i])}")
    for i in range(program.num_vars):
        lo, up = program.lower[i], program.upper[i]
        if np.isfinite(lo) or np.isfinite(up):
            lines.append(f"bound {i} {_fmt(lo)} {_fmt(up)}")
    for tag, mat, rhs in [("eq", program.a_eq, program.b_eq),
                          ("ineq", program.a_ineq, program.b_ineq)]:
        coo = mat.tocoo()
        lines.append(f"{tag}rows {rhs.size}")
        for r, c, v in zip(coo.row, coo.col, coo.data):
            lines.append(f"{tag} {r} {c} {_fmt(v)}")
        for r, v in enumerate(rhs):
            lines.append(f"{tag}rhs {r} {_fmt(v)}")
    for cone in program.soc:
        lines.append("soc " + " ".join(str(i) for i in cone))
    for b, blk in enumerate(program.psd):
        lines.append(f"psd {b} {blk.order}")
        for i in range(blk.order):
            for j in range(i, blk.order):
                if blk.constant[i, j] != 0.0:
                    lines.append(f"psdconst {b} {i} {j} {_fmt(blk.constant[i, j])}")
        for v, f in sorted(blk.coefficients.items()):
            for i in range(blk.order):
                for j in range(i, blk.order):
                    if f[i, j] != 0.0:
                        lines.append(f"psdcoef {b} {v} {i} {j} {_fmt(f[i, j])}")
    return "\n".join(lines) + "\n"


def load_program(text: str) -> ConicProgram:
    header, *rest = [ln for ln in text.splitlines() if ln.strip()]
    parts = header.split()
    if parts[:2] != ["conic-program", "v1"]:
        raise ConicError("not a conic-program v1 dump")
    n = int(parts[3])
    pb = ProgramBuilder()
    pb.add_vars(n)
    obj: dict[int, float] = {}
    offset = 0.0
    trip = {"eq": [], "ineq": []}
    rhs = {"eq": {}, "ineq": {}}
    nrows = {"eq": 0, "ineq": 0}
    soc = []
    psd_order: dict[int, int] = {}
    psd_const: dict[int, list] = {}
    psd_coef: dict[int, dict[int, list]] = {}
    for ln in rest:
        tok = ln.split()
        tag = tok[0]
        if tag == "offset":
            offset = float(tok[1])
        elif tag == "obj":
            obj[int(tok[1])] = float(tok[2])
        elif tag == "bound":
            i = int(tok[1])
            pb._lower[i] = float(tok[2])
            pb._upper[i] = float(tok[3])
        elif tag in ("eqrows", "ineqrows"):
            nrows[tag[:-4]] = int(tok[1])
        elif tag in ("eq", "ineq"):
            trip[tag].append((int(tok[1]), int(tok[2]), float(tok[3])))
        elif tag in ("eqrhs", "ineqrhs"):
            rhs[tag[:-3]][int(tok[1])] = float(tok[2])
        elif tag == "soc":
            soc.append(tuple(int(i) for i in tok[1:]))
        elif tag == "psd":
            psd_order[int(tok[1])] = int(tok[2])
        elif tag == "psdconst":
            psd_const.setdefault(int(tok[1]), []).append((int(tok[2]), int(tok[3]), float(tok[4])))
        elif tag == "psdcoef":
            psd_coef.setdefault(int(tok[1]), {}).setdefault(int(tok[2]), []).append(
                (int(tok[3]), int(tok[4]), float(tok[5])))
        else:
            raise ConicError(f"unknown dump line: {ln}")
    for kind in ("eq", "ineq"):
        rows = [dict() for _ in range(nrows[kind])]
        for r, c, v in trip[kind]:
            rows[r][c] = v
        for r, row in enumerate(rows):
            target = pb.add_eq if kind == "eq" else pb.add_ineq
            target(row, rhs[kind].get(r, 0.0))
    for head, *tail in soc:
        pb.add_soc(head, tail)
    for b, order in sorted(psd_order.items()):
        const = np.zeros((order, order))
        for i, j, v in psd_const.get(b, []):
            const[i, j] = const[j, i] = v
        coeffs = {}
        for v, entries in psd_coef.get(b, {}).items():
            f = np.zeros((order, order))
            for i, j, val in entries:
                f[i, j] = f[j, i] = val
            coeffs[v] = f
        pb.add_psd(const, coeffs)
    pb.add_objective(obj, offset)
    return pb.build()
