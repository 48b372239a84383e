"""Test-system model: case-file ingestion, validation, and shift factors.

Case files use a MATPOWER-style plain-text subset::

    function mpc = name
    mpc.baseMVA = 100;
    mpc.bus = [ ... ];        % bus_i  type  Pd  ...        (type 3 = slack)
    mpc.gen = [ ... ];        % bus Pg Qg Qmax Qmin Vg mBase status Pmax Pmin
                              %   ... ramp_agc in column 17 (MW/min), if present
    mpc.branch = [ ... ];     % fbus tbus r x b rateA ... status in column 11
    mpc.gencost = [ ... ];    % model startup shutdown n  c_(n-1) ... c_0
    mpc.renewables = [ ... ]; % bus  w_min  w_max           (repo extension)
    mpc.time = [ T delta_d delta_r ];                       (repo extension)
    mpc.load_profile = [ ... ];  % optional T x N bus loads, MW
    mpc.forecast = [ ... ];      % optional T x K renewable forecasts, MW
    mpc.gen_init = [ ... ];      % optional I x 1 initial dispatch, MW

Elements with status 0 are dropped.  Without ``load_profile`` the bus Pd is
held constant over all T periods; without ``forecast`` each renewable defaults
to the midpoint of its capacity band.

Conventions fixed here (case files do not state them):

* line flow is positive in the ``from -> to`` direction;
* the slack bus is the type-3 bus, else the first generator bus;
* units are MW/MWh/$ everywhere; per-unit quantities appear only inside the
  shift-factor computation.
"""

from __future__ import annotations

import io
import re
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.sparse import csgraph, csr_matrix


class CaseError(Exception):
    """Invalid case file or grid data."""


@dataclass(frozen=True)
class CostCurve:
    """Convex generation cost in $ per hour as a function of output in MW.

    kind 'linear': coefficients (c1, c0); 'quadratic': (c2, c1, c0) with
    c2 >= 0; 'pwl': breakpoints ((x, y), ...) with nondecreasing slopes.
    """

    kind: str
    coefficients: tuple[float, ...] = ()
    breakpoints: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.kind == "linear":
            if len(self.coefficients) != 2:
                raise CaseError("linear cost needs coefficients (c1, c0)")
        elif self.kind == "quadratic":
            if len(self.coefficients) != 3:
                raise CaseError("quadratic cost needs coefficients (c2, c1, c0)")
            if self.coefficients[0] < 0:
                raise CaseError("quadratic cost must have a nonnegative leading coefficient")
        elif self.kind == "pwl":
            if len(self.breakpoints) < 2:
                raise CaseError("piecewise-linear cost needs at least two breakpoints")
            xs = [p[0] for p in self.breakpoints]
            if any(b <= a for a, b in zip(xs, xs[1:])):
                raise CaseError("piecewise-linear breakpoints must be strictly increasing in x")
            slopeelf.segment_slopes()
            if any(b < a - 1e-12 for a, b in zip(slopes, slopes[1:])):
                raise CaseError("piecewise-linear cost must have nondecreasing slopes (convex)")
        else:
            raise CaseError(f"unknown cost kind '{self.kind}'")

    def segment_slopes(self) -> list[float]:
        ptelf.breakpoints
        return [(y2 - y1) / (x2 - x1) for (x1, y1), (x2, y2) in zip(pts, pts[1:])]

    def value(self, p):
        p = np.asarray(p, dtype=float)
        if self.kind == "linear":
            c1, c0 = self.coefficients
            return c1 * p + c0
        if self.kind == "quadratic":
            c2, c1, c0 = self.coefficients
            return c2 * p * p + c1 * p + c0
        # convex pwl: max over supporting lines
        vals = [(y1 + s * (p - x1)) for s, (x1, y1) in zip(self.segment_slopes(), self.breakpoints)]
        return np.maximum.reduce(vals)


@dataclass(frozen=True)
class Bus:
    bus_id: int
    load: np.ndarray  # (T,) MW


@dataclass(frozen=True)
class Line:
    from_bus: int
    to_bus: int
    reactance: float  # p.u.
    capacity: float  # MW


@dataclass(frozen=True)
class Generator:
    name: str
    bus: int
    p_min: float
    p_max: float
    ramp_up: float  # MW/min
    ramp_dn: float  # MW/min
    cost: CostCurve
    p_init: float | None = None


@dataclass(frozen=True)
class Renewable:
    name: str
    bus: int
    w_min: float
    w_max: float
    forecast: np.ndarray  # (T,) MW


@dataclass(frozen=True)
class GridCase:
    """Immutable network + data bundle; safe to share across solves."""

    name: str
    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    generators: tuple[Generator, ...]
    renewables: tuple[Renewable, ...]
    periods: int
    dispatch_minutes: float
    response_minutes: float
    slack_bus: int
    shift_factors: np.ndarray  # (N, L), row of slack bus all zero

    def __post_init__(self):
        t = self.periods
        if t < 1:
            raise CaseError("periods must be >= 1")
        ids = [b.bus_id for b in self.buses]
        if len(set(ids)) != len(ids):
            raise CaseError("duplicate bus ids")
        known = set(ids)
        if self.slack_bus not in known:
            raise CaseError(f"slack bus {self.slack_bus} is not a bus")
        for b in self.buses:
            if b.load.shape != (t,):
                raise CaseError(f"bus {b.bus_id}: load must have one value per period")
        for ln in self.lines:
            if ln.from_bus not in known or ln.to_bus not in known:
                raise CaseError(f"line {ln.from_bus}-{ln.to_bus} references an unknown bus")
            if ln.reactance <= 0:
                raise CaseError(f"line {ln.from_bus}-{ln.to_bus}: reactance must be positive")
            if ln.capacity < 0:
                raise CaseError(f"line {ln.from_bus}-{ln.to_bus}: capacity must be nonnegative")
        for g in self.generators:
            if g.bus not in known:
                raise CaseError(f"generator {g.name} sits on unknown bus {g.bus}")
            if g.p_min > g.p_max:
                raise CaseError(f"generator {g.name}: p_min {g.p_min} exceeds p_max {g.p_max}")
            if g.ramp_up < 0 or g.ramp_dn < 0:
                raise CaseError(f"generator {g.name}: ramp rates must be nonnegative")
        for r in self.renewables:
            if r.bus not in known:
                raise CaseError(f"renewable {r.name} sits on unknown bus {r.bus}")
            if not (0 <= r.w_min <= r.w_max):
                raise CaseError(f"renewable {r.name}: need 0 <= w_min <= w_max")
            if r.forecast.shape != (t,):
                raise CaseError(f"renewable {r.name}: forecast must have one value per period")
            if np.any(r.forecast < r.w_min - 1e-9) or np.any(r.forecast > r.w_max + 1e-9):
                raise CaseError(f"renewable {r.name}: forecast outside [w_min, w_max]")
        n, l = len(self.buses), len(self.lines)
        if self.shift_factors.shape != (n, l):
            raise CaseError("shift factor table has the wrong shape")
        srow = self.shift_factors[self.bus_index(self.slack_bus)]
        if l and np.max(np.abs(srow)) > 1e-12:
            raise CaseError("shift-factor row of the slack bus must be zero")

    # -- indexing helpers -------------------------------------------------
    def bus_index(self, bus_id: int) -> int:
        for i, b in enumerate(self.buses):
            if b.bus_id == bus_id:
                return i
        raise CaseError(f"unknown bus {bus_id}")

    @property
    def num_buses(self) -> int:
        return len(self.buses)

    @property
    def num_lines(self) -> int:
        return len(self.lines)

    @property
    def num_generators(self) -> int:
        return len(self.generators)

    @property
    def num_renewables(self) -> int:
        return len(self.renewables)

    @property
    def load_matrix(self) -> np.ndarray:
        """(N, T) bus loads in MW."""
        return np.array([b.load for b in self.buses])

    @property
    def forecast_matrix(self) -> np.ndarray:
        """(K, T) renewable forecasts in MW."""
        return np.array([r.forecast for r in self.renewables]).reshape(self.num_renewables, self.periods)

    @property
    def renewable_caps(self) -> np.ndarray:
        return np.array([r.w_max for r in self.renewables])


def build_case(name, buses, lines, generators, renewables, periods,
               dispatch_minutes, response_minutes, slack_bus) -> GridCase:
    """Construct a validated GridCase, computing shift factors on the way."""
    factors = _shift_factor_table([b.bus_id for b in buses], lines, slack_bus)
    return GridCase(name=name, buses=tuple(buses), lines=tuple(lines),
                    generators=tuple(generators), renewables=tuple(renewables),
                    periods=periods, dispatch_minutes=dispatch_minutes,
                    response_minutes=response_minutes, slack_bus=slack_bus,
                    shift_factors=factors)


def _shift_factor_table(bus_ids, lines, slack_bus) -> np.ndarray:
    n, l = len(bus_ids), len(lines)
    if l == 0:
        return np.zeros((n, 0))
    pos = {b: i for i, b in enumerate(bus_ids)}
    if slack_bus not in pos:
        raise CaseError(f"slack bus {slack_bus} is not a bus")
    inc = np.zeros((l, n))
    suscept = np.zeros(l)
    for j, ln in enumerate(lines):
        if ln.reactance <= 0:
            raise CaseError(f"line {ln.from_bus}-{ln.to_bus}: reactance must be positive")
        inc[j, pos[ln.from_bus]] = 1.0
        inc[j, pos[ln.to_bus]] = -1.0
        suscept[j] = 1.0 / ln.reactance

    adj = csr_matrix((np.ones(l), ([pos[ln.from_bus] for ln in lines],
                                   [pos[ln.to_bus] for ln in lines])), shape=(n, n))
    ncomp, _ = csgraph.connected_components(adj, directed=False)
    if ncomp > 1:
        raise CaseError(f"network is disconnected ({ncomp} components)")

    b_mat = inc.T @ np.diag(suscept) @ inc
    keep = [i for i in range(n) if i != pos[slack_bus]]
    b_red = b_mat[np.ix_(keep, keep)]
    try:
        inv = np.linalg.solve(b_red, np.eye(n - 1))
    except np.linalg.LinAlgError as exc:
        raise CaseError(f"singular susceptance system: {exc}") from None
    # flow = diag(b) @ inc @ theta with theta_slack = 0
    factors = np.zeros((n, l))
    factors[keep, :] = (np.diag(suscept) @ inc[:, keep] @ inv).T
    return factors


def compute_shift_factors(case: GridCase) -> np.ndarray:
    """(N, L) table: flow on line l per MW injected at bus n, withdrawn at slack."""
    return _shift_factor_table([b.bus_id for b in case.buses], case.lines, case.slack_bus)


def line_flows(case: GridCase, injections: np.ndarray) -> np.ndarray:
    """Flows (..., L) from net injections (..., N); positive from->to."""
    return np.asarray(injections) @ case.shift_factors


# ---------------------------------------------------------------------------
# MATPOWER-subset parsing
# ---------------------------------------------------------------------------

_TABLE_RE = re.compile(r"mpc\.(\w+)\s*=\s*\[")
_SCALAR_RE = re.compile(r"mpc\.(\w+)\s*=\s*([^;\[]+);")


def _strip_comment(line: str) -> str:
    cut = line.find("%")
    return line if cut < 0 else line[:cut]


def _parse_tables(text: str):
    """Returns {name: (rows, line_numbers)} plus scalar assignments."""
    tables = {}
    scalars = {}
    lines = text.splitlines()
    i = 0
    while i < len(lines):
        raw = _strip_comment(lines[i])
        m = _TABLE_RE.search(raw)
        if not m:
            s = _SCALAR_RE.search(raw)
            if s:
                scalars[s.group(1)] = s.group(2).strip().strip("'\"")
            i += 1
            continue
        name = m.group(1)
        body = raw[m.end():]
        rows, row_lines = [], []
        lineno = i + 1
        closed = False
        while True:
            chunk = body
            if "]" in chunk:
                chunk = chunk[:chunk.index("]")]
                closed = True
            for piece in chunk.split(";"):
                piece = piece.strip()
                if not piece:
                    continue
                vals = []
                for tok in piece.replace(",", " ").split():
                    try:
                        vals.append(float(tok))
                    except ValueError:
                        raise CaseError(f"line {lineno}: non-numeric value '{tok}' in mpc.{name}") from None
                rows.append(vals)
                row_lines.append(lineno)
            if closed:
                break
            i += 1
            if i >= len(lines):
                raise CaseError(f"line {lineno}: unterminated table mpc.{name}")
            body = _strip_comment(lines[i])
            lineno = i + 1
        tables[name] = (rows, row_lines)
        i += 1
    return tables, scalars


def _as_matrix(name, rows, row_lines, min_cols) -> np.ndarray:
    if not rows:
        raise CaseError(f"table mpc.{name} is empty")
    width = len(rows[0])
    for r, ln in zip(rows, row_lines):
        if len(r) != width:
            raise CaseError(f"line {ln}: ragged row in mpc.{name} "
                            f"(expected {width} values, found {len(r)})")
    if width < min_cols:
        raise CaseError(f"table mpc.{name} needs at least {min_cols} columns, found {width}")
    return np.array(rows)


def _cost_curve_from_gencost(row, gen_name) -> CostCurve:
    model = int(row[0])
    n = int(row[3])
    coeffs = row[4:4 + (2 * n if model == 1 else n)]
    if model == 2:
        if n == 3:
            return CostCurve("quadratic", tuple(coeffs))
        if n == 2:
            return CostCurve("linear", tuple(coeffs))
        raise CaseError(f"gencost for {gen_name}: polynomial order {n} unsupported (use 2 or 3)")
    if model == 1:
        pts = tuple((coeffs[2 * i], coeffs[2 * i + 1]) for i in range(n))
        return CostCurve("pwl", breakpoints=pts)
    raise CaseError(f"gencost for {gen_name}: unknown model {model}")


def parse_case(text: str) -> GridCase:
    """Parse a case file into a validated GridCase."""
    tables, scalars = _parse_tables(text)
    for required in ("bus", "gen", "branch", "gencost", "renewables", "time"):
        if required not in tables:
            raise CaseError(f"case file is missing the mpc.{required} table")

    time_row = _as_matrix("time", *tables["time"], min_cols=3)
    if time_row.shape[0] != 1:
        raise CaseError("mpc.time must be a single row [T delta_d delta_r]")
    periods = int(time_row[0, 0])
    delta_d, delta_r = float(time_row[0, 1]), float(time_row[0, 2])

    bus_tab = _as_matrix("bus", *tables["bus"], min_cols=3)
    buses = []
    slack = None
    for row in bus_tab:
        bid = int(row[0])
        if int(row[1]) == 3:
            slack = bid
        buses.append(Bus(bus_id=bid, load=np.full(periods, float(row[2]))))

    gen_tab = _as_matrix("gen", *tables["gen"], min_cols=10)
    cost_tab = _as_matrix("gencost", *tables["gencost"], min_cols=4)
    if cost_tab.shape[0] != gen_tab.shape[0]:
        raise CaseError("mpc.gencost must have one row per generator")
    init_tab = None
    if "gen_init" in tables:
        init_tab = _as_matrix("gen_init", *tables["gen_init"], min_cols=1)
        if init_tab.shape[0] != gen_tab.shape[0]:
            raise CaseError("mpc.gen_init must have one row per generator")
    generators = []
    for idx, row in enumerate(gen_tab):
        if len(row) > 7 and row[7] == 0:
            continue
        name = f"G{idx + 1}"
        ramp = float(row[16]) if len(row) > 16 else float("inf")
        generators.append(Generator(
            name=name, bus=int(row[0]), p_min=float(row[9]), p_max=float(row[8]),
            ramp_up=ramp, ramp_dn=ramp,
            cost=_cost_curve_from_gencost(list(cost_tab[idx]), name),
            p_init=float(init_tab[idx, 0]) if init_tab is not None else None))
    if slack is None:
        if not generators:
            raise CaseError("no slack bus (type 3) and no generator to default to")
        slack = generators[0].bus

    branch_tab = _as_matrix("branch", *tables["branch"], min_cols=6)
    lines = []
    for row in branch_tab:
        if len(row) > 10 and row[10] == 0:
            continue
        lines.append(Line(from_bus=int(row[0]), to_bus=int(row[1]),
                          reactance=float(row[3]), capacity=float(row[5])))

    ren_tab = _as_matrix("renewables", *tables["renewables"], min_cols=3)
    renewables = []
    for idx, row in enumerate(ren_tab):
        w_min, w_max = float(row[1]), float(row[2])
        renewables.append(Renewable(
            name=f"W{idx + 1}", bus=int(row[0]), w_min=w_min, w_max=w_max,
            forecast=np.full(periods, 0.5 * (w_min + w_max))))

    if "load_profile" in tables:
        prof = _as_matrix("load_profile", *tables["load_profile"], min_cols=len(buses))
        if prof.shape != (periods, len(buses)):
            raise CaseError(f"mpc.load_profile must be {periods} x {len(buses)}")
        buses = [replace(b, load=prof[:, i].copy()) for i, b in enumerate(buses)]
    if "forecast" in tables:
        fc = _as_matrix("forecast", *tables["forecast"], min_cols=len(renewables))
        if fc.shape != (periods, len(renewables)):
            raise CaseError(f"mpc.forecast must be {periods} x {len(renewables)}")
        renewables = [replace(r, forecast=fc[:, k].copy()) for k, r in enumerate(renewables)]

    return build_case(scalars.get("name", "case"), buses, lines, generators,
                      renewables, periods, delta_d, delta_r, slack)


def _num(value) -> str:
    return repr(float(value))


def serialize_case(case: GridCase) -> str:
    """Emit the MATPOWER-subset text; parse(serialize(case)) reproduces case."""
    out = io.StringIO()
    out.write(f"function mpc = {case.name}\n")
    out.write(f"mpc.name = '{case.name}';\n")
    out.write("mpc.version = '2';\n")
    out.write("mpc.baseMVA = 100;\n")
    out.write("mpc.bus = [\n")
    for b in case.buses:
        btype = 3 if b.bus_id == case.slack_bus else 1
        out.write(f"  {b.bus_id} {btype} {_num(b.load[0])} 0 0 0 1 1 0 1 1 1.1 0.9;\n")
    out.write("];\n")
    out.write("mpc.gen = [\n")
    for g in case.generators:
        out.write(f"  {g.bus} 0 0 0 0 1 100 1 {_num(g.p_max)} {_num(g.p_min)} "
                  f"0 0 0 0 0 0 {_num(g.ramp_up)} 0 0 0 0;\n")
    out.write("];\n")
    out.write("mpc.branch = [\n")
    for ln in case.lines:
        out.write(f"  {ln.from_bus} {ln.to_bus} 0 {_num(ln.reactance)} 0 {_num(ln.capacity)} "
                  f"0 0 0 0 1 -360 360;\n")
    out.write("];\n")
    out.write("mpc.gencost = [\n")
    for g in case.generators:
        c = g.cost
        if c.kind == "quadratic":
            out.write(f"  2 0 0 3 {_num(c.coefficients[0])} {_num(c.coefficients[1])} "
                      f"{_num(c.coefficients[2])};\n")
        elif c.kind == "linear":
            out.write(f"  2 0 0 2 {_num(c.coefficients[0])} {_num(c.coefficients[1])};\n")
        else:
            pts = " ".join(f"{_num(x)} {_num(y)}" for x, y in c.breakpoints)
            out.write(f"  1 0 0 {len(c.breakpoints)} {pts};\n")
    out.write("];\n")
    out.write("mpc.renewables = [\n")
    for r in case.renewables:
        out.write(f"  {r.bus} {_num(r.w_min)} {_num(r.w_max)};\n")
    out.write("];\n")
    out.write(f"mpc.time = [ {case.periods} {_num(case.dispatch_minutes)} "
              f"{_num(case.response_minutes)} ];\n")
    out.write("mpc.load_profile = [\n")
    loads = case.load_matrix
    for t in range(case.periods):
        out.write("  " + " ".join(_num(v) for v in loads[:, t]) + ";\n")
    out.write("];\n")
    if case.num_renewables:
        out.write("mpc.forecast = [\n")
        fc = case.forecast_matrix
        for t in range(case.periods):
            out.write("  " + " ".join(_num(v) for v in fc[:, t]) + ";\n")
        out.write("];\n")
    if any(g.p_init is not None for g in case.generators):
        out.write("mpc.gen_init = [\n")
        for g in case.generators:
            out.write(f"  {_num(g.p_init if g.p_init is not None else 0.0)};\n")
        out.write("];\n")
    return out.getvalue()


# ---------------------------------------------------------------------------
# Delimited series tables (forecasts, load profiles, error histories)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SeriesTable:
    names: tuple[str, ...]
    values: np.ndarray  # (rows, len(names))

    def column(self, name: str) -> np.ndarray:
        try:
            return self.values[:, self.names.index(name)]
        except ValueError:
            raise CaseError(f"series has no column '{name}' (columns: {', '.join(self.names)})") from None


def load_series(text: str, expected_rows: int | None = None) -> SeriesTable:
    """Parse a comma-delimited table with a mandatory header row."""
    rows = [ln.strip() for ln in text.splitlines()
            if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows:
        raise CaseError("series file is empty")
    names = tuple(h.strip() for h in rows[0].split(","))
    data = []
    for lineno, ln in enumerate(rows[1:], start=2):
        cells = [c.strip() for c in ln.split(",")]
        if len(cells) != len(names):
            raise CaseError(f"line {lineno}: ragged row "
                            f"(expected {len(names)} cells, found {len(cells)})")
        try:
            data.append([float(c) for c in cells])
        except ValueError as exc:
            raise CaseError(f"line {lineno}: non-numeric cell ({exc})") from None
    values = np.array(data).reshape(len(data), len(names))
    if expected_rows is not None and values.shape[0] != expected_rows:
        raise CaseError(f"series has {values.shape[0]} rows, expected {expected_rows} periods")
    return SeriesTable(names=names, values=values)


def dump_series(names, values) -> str:
    values = np.asarray(values)
    out = [",".join(names)]
    for row in values:
        out.append(",".join(_num(v) for v in row))
    return "\n".join(out) + "\n"


def with_load_profile(case: GridCase, table: SeriesTable) -> GridCase:
    """Attach per-period loads: a 'scale' column multiplies every bus load,
    otherwise columns are bus ids with absolute MW values."""
    if table.values.shape[0] != case.periods:
        raise CaseError(f"load profile has {table.values.shape[0]} rows, "
                        f"expected {case.periods} periods")
    if table.names == ("scale",):
        scale = table.values[:, 0]
        buses = [replace(b, load=b.load * scale) for b in case.buses]
    else:
        by_id = {b.bus_id: b for b in case.buses}
        buses = list(case.buses)
        for j, name in enumerate(table.names):
            bid = int(name)
            if bid not in by_id:
                raise CaseError(f"load profile column '{name}' is not a bus id")
            buses[case.bus_index(bid)] = replace(by_id[bid], load=table.values[:, j].copy())
    return build_case(case.name, buses, case.lines, case.generators,
                      case.renewables, case.periods, case.dispatch_minutes,
                      case.response_minutes, case.slack_bus)


def with_forecast(case: GridCase, table: SeriesTable) -> GridCase:
    """Attach renewable forecasts; columns are renewable names (W1, W2, ...)."""
    if table.values.shape[0] != case.periods:
        raise CaseError(f"forecast has {table.values.shape[0]} rows, "
                        f"expected {case.periods} periods")
    by_name = {r.name: i for i, r in enumerate(case.renewables)}
    renewables = list(case.renewables)
    for j, name in enumerate(table.names):
        if name not in by_name:
            raise CaseError(f"forecast column '{name}' is not a renewable "
                            f"(expected one of {sorted(by_name)})")
        k = by_name[name]
        renewables[k] = replace(renewables[k], forecast=table.values[:, j].copy())
    return build_case(case.name, case.buses, case.lines, case.generators,
                      renewables, case.periods, case.dispatch_minutes,
                      case.response_minutes, case.slack_bus)


def scale_loads(case: GridCase, factor: float) -> GridCase:
    """Multiply every bus load in every period by the factor."""
    buses = [replace(b, load=b.load * factor) for b in case.buses]
    return build_case(case.name, buses, case.lines, case.generators,
                      case.renewables, case.periods, case.dispatch_minutes,
                      case.response_minutes, case.slack_bus)


def structurally_equal(a: GridCase, b: GridCase) -> bool:
    """Field-by-field equality with exact array comparison."""
    if (a.name, a.periods, a.dispatch_minutes, a.response_minutes, a.slack_bus) != \
       (b.name, b.periods, b.dispatch_minutes, b.response_minutes, b.slack_bus):
        return False
    if len(a.buses) != len(b.buses) or len(a.lines) != len(b.lines) or \
       len(a.generators) != len(b.generators) or len(a.renewables) != len(b.renewables):
        return False
    for x, y in zip(a.buses, b.buses):
        if x.bus_id != y.bus_id or not np.array_equal(x.load, y.load):
            return False
    if list(a.lines) != list(b.lines):
        return False
    for x, y in zip(a.generators, b.generators):
        if (x.name, x.bus, x.p_min, x.p_max, x.ramp_up, x.ramp_dn, x.cost, x.p_init) != \
           (y.name, y.bus, y.p_min, y.p_max, y.ramp_up, y.ramp_dn, y.cost, y.p_init):
            return False
    for x, y in zip(a.renewables, b.renewables):
        if (x.name, x.bus, x.w_min, x.w_max) != (y.name, y.bus, y.w_min, y.w_max) or \
           not np.array_equal(x.forecast, y.forecast):
            return False
    return True


def scale_ramps(case: GridCase, fraction_of_pmax: float) -> GridCase:
    """Set every generator's ramp rate to fraction_of_pmax * p_max MW/min."""
    gens = [replace(g, ramp_up=fraction_of_pmax * g.p_max,
                    ramp_dn=fraction_of_pmax * g.p_max) for g in case.generators]
    return build_case(case.name, case.buses, case.lines, gens,
                      case.renewables, case.periods, case.dispatch_minutes,
                      case.response_minutes, case.slack_bus)
