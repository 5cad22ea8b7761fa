"""MATPOWER case files: parsing, per-unit conversion and preprocessing.

Only the ``mpc`` sections used by the relaxation are interpreted
(``baseMVA``, ``bus``, ``gen``, ``branch``, ``gencost``); anything else is
skipped with a warning. Power quantities are stored per-unit on the system
MVA base and angles in radians.
"""

from __future__ import annotations

import dataclasses
import enum
import json
import math
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

__all__ = [
    "Branch",
    "Bus",
    "BusType",
    "CaseData",
    "CaseError",
    "CaseSyntaxError",
    "CostCurve",
    "DisconnectedNetworkError",
    "Generator",
    "PreprocessOptions",
    "UnsupportedCostError",
    "case_from_json",
    "case_to_json",
    "load_case",
    "parse_case",
    "preprocess",
]


class CaseError(ValueError):
    """Invalid or unsupported case data."""


class CaseSyntaxError(CaseError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnsupportedCostError(CaseError):
    """Piecewise-linear, higher-degree or nonconvex generator cost."""


class DisconnectedNetworkError(CaseError):
    """The in-service network has more than one connected component."""


class BusType(enum.IntEnum):
    PQ = 1
    PV = 2
    REF = 3
    ISOLATED = 4


@dataclass(frozen=True)
class CostCurve:
    """Quadratic cost ``alpha * p**2 + beta * p + gamma`` with ``p`` in p.u."""

    alpha: float = 0.0
    beta: float = 0.0
    gamma: float = 0.0

    def __call__(self, p):
        return self.alpha * p * p + self.beta * p + self.gamma


@dataclass(frozen=True)
class Bus:
    id: int
    type: BusType
    Pd: float
    Qd: float
    Gs: float
    Bs: float
    Vmin: float
    Vmax: float
    baseKV: float = 0.0


@dataclass(frozen=True)
class Generator:
    bus: int
    Pmin: float
    Pmax: float
    Qmin: float
    Qmax: float
    status: bool
    cost: CostCurve
    fixed_p: bool = False
    fixed_q: bool = False


# Angle limits at or beyond this magnitude (degrees) mean "unconstrained".
_ANGLE_SENTINEL_DEG = 90.0


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    r: float
    x: float
    b: float
    tau: float = 1.0
    theta_shift: float = 0.0
    rateA: float = 0.0
    angmin: float = -2 * math.pi
    angmax: float = 2 * math.pi
    status: bool = True

    @property
    def has_flow_limit(self) -> bool:
        return self.rateA > 0

    @property
    def has_angle_limit(self) -> bool:
        """True when both angle bounds are usable by the tan-linearization."""
        lim = math.radians(_ANGLE_SENTINEL_DEG)
        return all(a != 0.0 and abs(a) < lim for a in (self.angmin, self.angmax))


@dataclass(frozen=True)
class CaseData:
    name: str
    baseMVA: float
    buses: tuple[Bus, ...]
    generators: tuple[Generator, ...]
    branches: tuple[Branch, ...]
    notes: tuple[str, ...] = field(default=())

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    def bus_index(self) -> dict[int, int]:
        """Map external bus id to 0-based position."""
        return {b.id: k for k, b in enumerate(self.buses)}

    def reference_bus(self) -> int:
        """Position of the first reference bus (0 if the case has none)."""
        for k, b in enumerate(self.buses):
            if b.type == BusType.REF:
                return k
        return 0


@dataclass(frozen=True)
class PreprocessOptions:
    bound_cap_multiple: float = 50.0
    enforce_min_resistance: float | None = None
    eliminate_fixed: bool = True

    def __post_init__(self):
        if not self.bound_cap_multiple > 0:
            raise ValueError("bound_cap_multiple must be positive")


# ---------------------------------------------------------------------------
# Parsing

_SECTIONS = ("bus", "gen", "branch", "gencost")
_ASSIGN = re.compile(r"^\s*mpc\.(\w+)\s*=\s*(.*)$")
_FUNCTION = re.compile(r"^\s*function\s+(?:\w+\s*=\s*)?(\w+)")


def _strip_comment(line: str) -> str:
    # '%' inside a quoted string does not start a comment
    quoted = False
    for k, ch in enumerate(line):
        if ch == "'":
            quoted = not quoted
        elif ch == "%" and not quoted:
            return line[:k]
    return line


def _parse_numbers(chunk: str, lineno: int) -> list[float]:
    out = []
    for tok in chunk.replace(",", " ").split():
        try:
            out.append(float(tok))
        except ValueError:
            raise CaseSyntaxError(f"cannot parse number {tok!r}", lineno) from None
    return out


def _read_sections(text: str) -> tuple[str, dict[str, str], dict[str, list]]:
    """Split case text into scalar assignments and numeric matrices."""
    name = "case"
    scalars: dict[str, str] = {}
    matrices: dict[str, list] = {}
    current: str | None = None  # open '[' matrix
    skipping: str | None = None  # closing delimiter of an ignored block
    rows: list[list[float]] = []
    row: list[float] = []
    start_line = 0

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if skipping is not None:
            if skipping in line:
                skipping = None
            continue
        if current is None:
            m = _FUNCTION.match(line)
            if m:
                name = m.group(1)
                continue
            m = _ASSIGN.match(line)
            if not m:
                if line.startswith("mpc"):
                    raise CaseSyntaxError(f"unrecognized statement {line!r}", lineno)
                continue
            key, rhs = m.group(1), m.group(2).strip()
            if rhs.startswith("["):
                if key not in _SECTIONS:
                    warnings.warn(f"ignoring unsupported case field mpc.{key}", stacklevel=3)
                    if "]" not in rhs:
                        skipping = "]"
                    continue
                current, rows, row, start_line = key, [], [], lineno
                line = rhs[1:]
            elif rhs.startswith("{"):
                warnings.warn(f"ignoring unsupported case field mpc.{key}", stacklevel=3)
                if "}" not in rhs:
                    skipping = "}"
                continue
            else:
                scalars[key] = rhs.rstrip(";").strip()
                continue

        # inside a numeric matrix
        done = False
        if "]" in line:
            line, tail = line.split("]", 1)
            if tail.strip() not in ("", ";"):
                raise CaseSyntaxError(f"unexpected text after ']': {tail.strip()!r}", lineno)
            done = True
        pieces = line.split(";")
        for k, piece in enumerate(pieces):
            row.extend(_parse_numbers(piece, lineno))
            if k < len(pieces) - 1 and row:
                rows.append(row)
                row = []
        # a newline also ends a row
        if row:
            rows.append(row)
            row = []
        if done:
            width = {len(r) for r in rows}
            if len(width) > 1:
                raise CaseSyntaxError(f"ragged rows in mpc.{current}", start_line)
            matrices[current] = rows
            current = None

    if current is not None:
        raise CaseSyntaxError(f"unterminated matrix mpc.{current}", start_line)
    return name, scalars, matrices


def _as_matrix(rows: list, ncols: int, what: str) -> np.ndarray:
    if not rows:
        return np.zeros((0, ncols))
    arr = np.asarray(rows, dtype=float)
    if arr.shape[1] < ncols:
        raise CaseSyntaxError(f"mpc.{what} needs at least {ncols} columns, got {arr.shape[1]}")
    return arr


def _cost_curve(row: np.ndarray, base: float) -> CostCurve:
    model = int(row[0])
    if model == 1:
        raise UnsupportedCostError("piecewise-linear generator costs are not supported")
    if model != 2:
        raise UnsupportedCostError(f"unknown cost model {model}")
    ncost = int(row[3])
    coeffs = [float(v) for v in row[4 : 4 + ncost]]
    if len(coeffs) < ncost:
        raise CaseSyntaxError("gencost row shorter than its NCOST")
    # highest-order first; drop zero leading terms before checking the degree
    while len(coeffs) > 1 and coeffs[0] == 0.0:
        coeffs.pop(0)
    if len(coeffs) > 3:
        raise UnsupportedCostError(f"polynomial cost of degree {len(coeffs) - 1} is not supported")
    c2, c1, c0 = ([0.0] * (3 - len(coeffs)) + coeffs) if coeffs else (0.0, 0.0, 0.0)
    if c2 < 0:
        raise UnsupportedCostError("nonconvex quadratic cost (negative quadratic coefficient)")
    # $/MW^2 -> $/p.u.^2
    return CostCurve(alpha=c2 * base * base, beta=c1 * base, gamma=c0)


def parse_case(text: str) -> CaseData:
    """Parse MATPOWER case text into per-unit :class:`CaseData`.

    Row order is preserved and out-of-service rows are kept (flagged by
    ``status``); :func:`preprocess` removes them.
    """
    name, scalars, mats = _read_sections(text)
    if "baseMVA" not in scalars:
        raise CaseSyntaxError("missing mpc.baseMVA")
    try:
        base = float(scalars["baseMVA"])
    except ValueError:
        raise CaseSyntaxError(f"bad baseMVA {scalars['baseMVA']!r}") from None
    if not base > 0:
        raise CaseError("baseMVA must be positive")
    version = scalars.get("version", "'2'").strip("'\"")
    if version != "2":
        raise CaseError(f"unsupported case format version {version!r}")
    for key in scalars:
        if key not in ("baseMVA", "version"):
            warnings.warn(f"ignoring unsupported case field mpc.{key}", stacklevel=2)
    for key in ("bus", "gen", "branch"):
        if key not in mats:
            raise CaseSyntaxError(f"missing mpc.{key}")

    bus = _as_matrix(mats["bus"], 13, "bus")
    gen = _as_matrix(mats["gen"], 10, "gen")
    branch = _as_matrix(mats["branch"], 11, "branch")
    gencost = _as_matrix(mats.get("gencost", []), 4, "gencost")

    buses = []
    seen: set[int] = set()
    for r in bus:
        bid = int(r[0])
        if bid in seen:
            raise CaseError(f"duplicate bus id {bid}")
        seen.add(bid)
        try:
            btype = BusType(int(r[1]))
        except ValueError:
            raise CaseError(f"bus {bid}: unknown bus type {int(r[1])}") from None
        buses.append(
            Bus(
                id=bid,
                type=btype,
                Pd=float(r[2] / base),
                Qd=float(r[3] / base),
                Gs=float(r[4] / base),
                Bs=float(r[5] / base),
                Vmin=float(r[12]),
                Vmax=float(r[11]),
                baseKV=float(r[9]),
            )
        )

    ng = gen.shape[0]
    if gencost.shape[0] < ng:
        raise CaseError(f"mpc.gencost has {gencost.shape[0]} rows for {ng} generators")
    if gencost.shape[0] > ng:
        warnings.warn("ignoring reactive-power cost rows in mpc.gencost", stacklevel=2)
    generators = []
    for r, cr in zip(gen, gencost[:ng]):
        gbus = int(r[0])
        if gbus not in seen:
            raise CaseError(f"generator at unknown bus {gbus}")
        generators.append(
            Generator(
                bus=gbus,
                Pmin=float(r[9] / base),
                Pmax=float(r[8] / base),
                Qmin=float(r[4] / base),
                Qmax=float(r[3] / base),
                status=bool(r[7] > 0),
                cost=_cost_curve(cr, base),
            )
        )

    branches = []
    for r in branch:
        f, t = int(r[0]), int(r[1])
        for end in (f, t):
            if end not in seen:
                raise CaseError(f"branch {f}-{t} references unknown bus {end}")
        tau = r[8] if r[8] != 0 else 1.0
        has_angles = branch.shape[1] >= 13
        branches.append(
            Branch(
                from_bus=f,
                to_bus=t,
                r=float(r[2]),
                x=float(r[3]),
                b=float(r[4]),
                tau=float(tau),
                theta_shift=math.radians(r[9]),
                rateA=float(r[5] / base),
                angmin=math.radians(r[11]) if has_angles else -2 * math.pi,
                angmax=math.radians(r[12]) if has_angles else 2 * math.pi,
                status=bool(r[10] > 0),
            )
        )

    return CaseData(
        name=name,
        baseMVA=base,
        buses=tuple(buses),
        generators=tuple(generators),
        branches=tuple(branches),
    )


def load_case(path: str | Path) -> CaseData:
    """Read and parse a case file.

    Bare names such as ``case9`` resolve to the bundled copies.
    """
    p = Path(path)
    if not p.exists():
        bundled = Path(__file__).parent / "data" / (p.name if p.suffix == ".m" else p.name + ".m")
        if p.parent == Path(".") and bundled.exists():
            p = bundled
        else:
            raise FileNotFoundError(f"case file not found: {path}")
    return parse_case(p.read_text(encoding="utf-8", errors="replace"))


# ---------------------------------------------------------------------------
# Preprocessing


def _clamp(value: float, cap: float) -> float:
    return max(-cap, min(cap, value))


def _check_connected(case: CaseData) -> None:
    n = case.n_bus
    if n <= 1:
        return
    idx = case.bus_index()
    f = [idx[br.from_bus] for br in case.branches]
    t = [idx[br.to_bus] for br in case.branches]
    adj = sp.coo_matrix((np.ones(len(f)), (f, t)), shape=(n, n))
    ncomp, _ = connected_components(adj, directed=False)
    if ncomp > 1:
        raise DisconnectedNetworkError(f"disconnected network: {ncomp} islands")


def preprocess(case: CaseData, opts: PreprocessOptions | None = None) -> CaseData:
    """Clean a parsed case for the relaxation builder.

    Removes out-of-service generators and branches and isolated buses,
    truncates generator bounds to ``opts.bound_cap_multiple`` p.u., flags
    fixed generators, and optionally applies a resistance floor. The result is
    validated and must be connected.
    """
    opts = opts or PreprocessOptions()
    cap = opts.bound_cap_multiple

    buses = tuple(b for b in case.buses if b.type != BusType.ISOLATED)
    alive = {b.id for b in buses}
    for b in buses:
        if not b.Vmin <= b.Vmax:
            raise CaseError(f"bus {b.id}: Vmin > Vmax")
        if not b.Vmin > 0:
            raise CaseError(f"bus {b.id}: Vmin must be positive")

    gens = []
    for g in case.generators:
        if not g.status or g.bus not in alive:
            continue
        g = dataclasses.replace(
            g,
            Pmin=_clamp(g.Pmin, cap),
            Pmax=_clamp(g.Pmax, cap),
            Qmin=_clamp(g.Qmin, cap),
            Qmax=_clamp(g.Qmax, cap),
        )
        if g.Pmin > g.Pmax or g.Qmin > g.Qmax:
            raise CaseError(f"generator at bus {g.bus}: lower bound exceeds upper bound")
        if opts.eliminate_fixed:
            g = dataclasses.replace(g, fixed_p=g.Pmin == g.Pmax, fixed_q=g.Qmin == g.Qmax)
        gens.append(g)

    branches = []
    for br in case.branches:
        if not br.status or br.from_bus not in alive or br.to_bus not in alive:
            continue
        if opts.enforce_min_resistance is not None and br.r < opts.enforce_min_resistance:
            br = dataclasses.replace(br, r=opts.enforce_min_resistance)
        if br.r == 0 and br.x == 0:
            raise CaseError(f"branch {br.from_bus}-{br.to_bus} has zero impedance")
        if not br.tau > 0:
            raise CaseError(f"branch {br.from_bus}-{br.to_bus} has nonpositive tap ratio")
        branches.append(br)

    notes = list(case.notes)
    note = f"generator bounds capped at {cap:g} p.u. (after per-unit conversion)"
    if note not in notes:
        notes.append(note)
    out = dataclasses.replace(
        case,
        buses=buses,
        generators=tuple(gens),
        branches=tuple(branches),
        notes=tuple(notes),
    )
    _check_connected(out)
    return out


# ---------------------------------------------------------------------------
# JSON debug dump

CASE_SCHEMA_VERSION = 1


def case_to_json(case: CaseData) -> str:
    """Canonical JSON rendering of a case (per-unit values, radians)."""
    doc = {
        "schema": CASE_SCHEMA_VERSION,
        "name": case.name,
        "baseMVA": case.baseMVA,
        "notes": list(case.notes),
        "buses": [dict(dataclasses.asdict(b), type=b.type.name) for b in case.buses],
        "generators": [dataclasses.asdict(g) for g in case.generators],
        "branches": [dataclasses.asdict(br) for br in case.branches],
    }
    return json.dumps(doc, indent=1, sort_keys=True)


def case_from_json(text: str) -> CaseData:
    doc = json.loads(text)
    if doc.get("schema") != CASE_SCHEMA_VERSION:
        raise CaseError("unsupported case JSON schema")
    buses = tuple(Bus(**dict(b, type=BusType[b["type"]])) for b in doc["buses"])
    gens = tuple(Generator(**dict(g, cost=CostCurve(**g["cost"]))) for g in doc["generators"])
    branches = tuple(Branch(**br) for br in doc["branches"])
    return CaseData(
        name=doc["name"],
        baseMVA=doc["baseMVA"],
        buses=buses,
        generators=gens,
        branches=branches,
        notes=tuple(doc["notes"]),
    )
