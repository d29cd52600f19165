"""In-memory MIP representation, node bound overlays and the reduced formulation.

Instances are stored as rows of sparse coefficients plus a dense copy of the
constraint matrix (built once, read-only) that the LP solver and the featurizer
share.  Files use a small line-oriented text format::

    # comment
    sense min
    var x1 0 1 int
    var x2 0 inf cont
    obj x1 -1
    row r1 <= 1.5 : x1*1 x2*1
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

LE, GE, EQ = "<=", ">=", "="
SENSES = (LE, GE, EQ)
INF = math.inf


class InstanceFormatError(ValueError):
    """Raised for unparsable instance files or invalid instance data."""


@dataclass(frozen=True)
class Row:
    coeffs: tuple[tuple[int, float], ...]
    sense: str
    rhs: float

    def __post_init__(self):
        if self.sense not in SENSES:
            raise InstanceFormatError(f"unknown row sense {self.sense!r}")
        seen = set()
        for j, a in self.coeffs:
            if j in seen:
                raise InstanceFormatError(f"duplicate variable index {j} in row")
            if a == 0:
                raise InstanceFormatError(f"explicit zero coefficient for variable {j}")
            seen.add(j)


def _readonly(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MipInstance:
    """A MIP ``min/max c x  s.t. rows, l <= x <= u, x_j integer for j in I``."""

    objective_sense: str
    c: np.ndarray
    rows: tuple[Row, ...]
    lb: np.ndarray
    ub: np.ndarray
    integrality: np.ndarray
    var_names: tuple[str, ...]
    row_names: tuple[str, ...]
    name: str = ""
    _dense: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "c", _readonly(self.c))
        object.__setattr__(self, "lb", _readonly(self.lb))
        object.__setattr__(self, "ub", _readonly(self.ub))
        object.__setattr__(self, "integrality", _readonly(self.integrality, bool))
        object.__setattr__(self, "rows", tuple(self.rows))
        object.__setattr__(self, "var_names", tuple(self.var_names))
        object.__setattr__(self, "row_names", tuple(self.row_names))
        self.validate()

    @property
    def n(self) -> int:
        return len(self.c)

    @property
    def m(self) -> int:
        return len(self.rows)

    @property
    def is_max(self) -> bool:
        return self.objective_sense == "max"

    @property
    def min_c(self) -> np.ndarray:
        """Objective in minimization form (negated for max problems)."""
        if "min_c" not in self._dense:
            cc = -self.c if self.is_max else self.c.copy()
            cc.setflags(write=False)
            self._dense["min_c"] = cc
        return self._dense["min_c"]

    def validate(self):
        n = len(self.c)
        if self.objective_sense not in ("min", "max"):
            raise InstanceFormatError(f"objective sense must be min or max, got {self.objective_sense!r}")
        if not (len(self.lb) == len(self.ub) == len(self.integrality) == len(self.var_names) == n):
            raise InstanceFormatError("vector lengths disagree with the number of variables")
        if len(self.row_names) != len(self.rows):
            raise InstanceFormatError("row name count differs from row count")
        if len(set(self.var_names)) != n:
            raise InstanceFormatError("duplicate variable names")
        if len(set(self.row_names)) != len(self.rows):
            raise InstanceFormatError("duplicate row names")
        for j in range(n):
            if self.lb[j] > self.ub[j]:
                raise InstanceFormatError(
                    f"bound inversion for variable {self.var_names[j]}: lb={self.lb[j]} > ub={self.ub[j]}")
            if np.isnan(self.lb[j]) or np.isnan(self.ub[j]) or not np.isfinite(self.c[j]):
                raise InstanceFormatError(f"non-numeric data for variable {self.var_names[j]}")
        for r, row in enumerate(self.rows):
            for j, _ in row.coeffs:
                if not 0 <= j < n:
                    raise InstanceFormatError(f"row {self.row_names[r]} references variable index {j} >= n")
            if not np.isfinite(row.rhs):
                raise InstanceFormatError(f"row {self.row_names[r]} has non-finite rhs")

    # dense views, built lazily and cached (the instance is immutable)
    @property
    def A(self) -> np.ndarray:
        if "A" not in self._dense:
            A = np.zeros((self.m, self.n))
            for r, row in enumerate(self.rows):
                for j, a in row.coeffs:
                    A[r, j] = a
            A.setflags(write=False)
            self._dense["A"] = A
        return self._dense["A"]

    @property
    def rhs(self) -> np.ndarray:
        if "rhs" not in self._dense:
            self._dense["rhs"] = _readonly([row.rhs for row in self.rows])
        return self._dense["rhs"]

    @property
    def senses(self) -> tuple[str, ...]:
        return tuple(row.sense for row in self.rows)

    @property
    def row_lo(self) -> np.ndarray:
        """Lower limit on each row activity (``-inf`` for <= rows)."""
        if "row_lo" not in self._dense:
            self._dense["row_lo"] = _readonly(
                [-INF if row.sense == LE else row.rhs for row in self.rows])
        return self._dense["row_lo"]

    @property
    def row_hi(self) -> np.ndarray:
        if "row_hi" not in self._dense:
            self._dense["row_hi"] = _readonly(
                [INF if row.sense == GE else row.rhs for row in self.rows])
        return self._dense["row_hi"]

    @property
    def le_form(self) -> tuple[np.ndarray, np.ndarray]:
        """``(A', b')`` with >= rows negated so that every row reads ``a x <= b``.

        Equality rows are kept as written.
        """
        if "le" not in self._dense:
            sign = np.array([-1.0 if s == GE else 1.0 for s in self.senses])
            A = self.A * sign[:, None] if self.m else self.A.copy()
            b = self.rhs * sign if self.m else self.rhs.copy()
            A.setflags(write=False)
            b.setflags(write=False)
            self._dense["le"] = (A, b)
        return self._dense["le"]

    def objective(self, x) -> float:
        return float(np.dot(self.c, x))

    def is_feasible(self, x, tol=1e-6, int_tol=1e-6) -> bool:
        x = np.asarray(x, dtype=float)
        if np.any(x < self.lb - tol) or np.any(x > self.ub + tol):
            return False
        xi = x[self.integrality]
        if np.any(np.abs(xi - np.round(xi)) > int_tol):
            return False
        if self.m:
            act = self.A @ x
            if np.any(act < self.row_lo - tol) or np.any(act > self.row_hi + tol):
                return False
        return True

    def __eq__(self, other):
        if not isinstance(other, MipInstance):
            return NotImplemented
        return (self.objective_sense == other.objective_sense
                and np.array_equal(self.c, other.c)
                and np.array_equal(self.lb, other.lb)
                and np.array_equal(self.ub, other.ub)
                and np.array_equal(self.integrality, other.integrality)
                and self.rows == other.rows
                and self.var_names == other.var_names
                and self.row_names == other.row_names)

    __hash__ = object.__hash__


def build_instance(sense, c, rows, lb, ub, integrality, var_names=None, row_names=None, name=""):
    """Convenience constructor.

    ``rows`` is a list of ``(coeffs, sense, rhs)`` where ``coeffs`` is either a
    dict ``{var: coef}`` or a sequence of ``(var, coef)`` pairs.  Zero
    coefficients are dropped and each row is stored in variable order.
    """
    n = len(c)
    built = []
    for coeffs, s, b in rows:
        items = coeffs.items() if isinstance(coeffs, dict) else coeffs
        built.append(Row(tuple(sorted((int(j), float(a)) for j, a in items if a != 0)), s, float(b)))
    if var_names is None:
        var_names = [f"x{j + 1}" for j in range(n)]
    if row_names is None:
        row_names = [f"r{i + 1}" for i in range(len(built))]
    return MipInstance(sense, np.asarray(c, float), tuple(built), np.asarray(lb, float),
                       np.asarray(ub, float), np.asarray(integrality, bool),
                       tuple(var_names), tuple(row_names), name=name)


# ---------------------------------------------------------------------------
# file format

def _fmt(v: float) -> str:
    if v == INF:
        return "inf"
    if v == -INF:
        return "-inf"
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def _num(tok: str, lineno: int) -> float:
    t = tok.lower()
    if t in ("inf", "+inf"):
        return INF
    if t == "-inf":
        return -INF
    try:
        v = float(tok)
    except ValueError:
        raise InstanceFormatError(f"line {lineno}: expected a number, got {tok!r}") from None
    if not math.isfinite(v):
        raise InstanceFormatError(f"line {lineno}: use the inf/-inf tokens for infinite values")
    return v


def dumps_instance(inst: MipInstance) -> str:
    out = [f"sense {inst.objective_sense}"]
    for j in range(inst.n):
        kind = "int" if inst.integrality[j] else "cont"
        out.append(f"var {inst.var_names[j]} {_fmt(inst.lb[j])} {_fmt(inst.ub[j])} {kind}")
    for j in range(inst.n):
        if inst.c[j] != 0:
            out.append(f"obj {inst.var_names[j]} {_fmt(inst.c[j])}")
    for r, row in enumerate(inst.rows):
        terms = " ".join(f"{inst.var_names[j]}*{_fmt(a)}" for j, a in sorted(row.coeffs))
        out.append(f"row {inst.row_names[r]} {row.sense} {_fmt(row.rhs)} : {terms}".rstrip())
    return "\n".join(out) + "\n"


def save_instance(inst: MipInstance, path) -> None:
    Path(path).write_text(dumps_instance(inst), encoding="utf-8")


def loads_instance(text: str, name: str = "") -> MipInstance:
    sense = None
    names: list[str] = []
    index: dict[str, int] = {}
    lb, ub, integ = [], [], []
    obj: dict[int, float] = {}
    rows, row_names = [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        kw = tok[0]
        if kw == "sense":
            if len(tok) != 2 or tok[1] not in ("min", "max"):
                raise InstanceFormatError(f"line {lineno}: expected 'sense min|max'")
            sense = tok[1]
        elif kw == "var":
            if len(tok) != 5 or tok[4] not in ("int", "cont"):
                raise InstanceFormatError(f"line {lineno}: expected 'var <name> <lb> <ub> <int|cont>'")
            vname = tok[1]
            if vname in index:
                raise InstanceFormatError(f"line {lineno}: duplicate variable {vname}")
            if "*" in vname:
                raise InstanceFormatError(f"line {lineno}: variable names may not contain '*'")
            lo, hi = _num(tok[2], lineno), _num(tok[3], lineno)
            if lo > hi:
                raise InstanceFormatError(f"line {lineno}: bound inversion for variable {vname}: {lo} > {hi}")
            index[vname] = len(names)
            names.append(vname)
            lb.append(lo)
            ub.append(hi)
            integ.append(tok[4] == "int")
        elif kw == "obj":
            if len(tok) != 3:
                raise InstanceFormatError(f"line {lineno}: expected 'obj <name> <coef>'")
            if tok[1] not in index:
                raise InstanceFormatError(f"line {lineno}: unknown variable {tok[1]}")
            obj[index[tok[1]]] = obj.get(index[tok[1]], 0.0) + _num(tok[2], lineno)
        elif kw == "row":
            head, sep, body = line.partition(":")
            htok = head.split()
            if not sep or len(htok) != 4 or htok[2] not in SENSES:
                raise InstanceFormatError(f"line {lineno}: expected 'row <name> <sense> <rhs> : <name>*<coef> ...'")
            coeffs = {}
            for term in body.split():
                vname, star, val = term.partition("*")
                if not star:
                    raise InstanceFormatError(f"line {lineno}: bad term {term!r}")
                if vname not in index:
                    raise InstanceFormatError(f"line {lineno}: unknown variable {vname}")
                j = index[vname]
                if j in coeffs:
                    raise InstanceFormatError(f"line {lineno}: variable {vname} repeated in row")
                a = _num(val, lineno)
                if not math.isfinite(a):
                    raise InstanceFormatError(f"line {lineno}: infinite coefficient")
                coeffs[j] = a
            if htok[1] in row_names:
                raise InstanceFormatError(f"line {lineno}: duplicate row {htok[1]}")
            rhs = _num(htok[3], lineno)
            rows.append(Row(tuple((j, a) for j, a in sorted(coeffs.items()) if a != 0), htok[2], rhs))
            row_names.append(htok[1])
        else:
            raise InstanceFormatError(f"line {lineno}: unknown statement {kw!r}")
    if sense is None:
        raise InstanceFormatError("missing 'sense' header")
    c = np.zeros(len(names))
    for j, v in obj.items():
        c[j] = v
    return MipInstance(sense, c, tuple(rows), np.array(lb), np.array(ub), np.array(integ, bool),
                       tuple(names), tuple(row_names), name=name)


def load_instance(path) -> MipInstance:
    path = Path(path)
    return loads_instance(path.read_text(encoding="utf-8"), name=path.stem)


# ---------------------------------------------------------------------------
# node bounds and reduced formulation

@dataclass(frozen=True)
class NodeBounds:
    """Sparse bound overrides ``var -> (lb, ub)`` relative to the instance."""

    overrides: dict = field(default_factory=dict)

    def tighten(self, inst: MipInstance, var: int, lb=None, ub=None) -> "NodeBounds":
        """Return new bounds with ``var`` restricted further (never relaxed)."""
        cur_lo, cur_hi = self.get(inst, var)
        lo = cur_lo if lb is None else max(cur_lo, lb)
        hi = cur_hi if ub is None else min(cur_hi, ub)
        if lo > hi:
            raise ValueError(f"empty domain for variable {var}: [{lo}, {hi}]")
        new = dict(self.overrides)
        new[var] = (lo, hi)
        return NodeBounds(new)

    def get(self, inst: MipInstance, var: int) -> tuple[float, float]:
        if var in self.overrides:
            return self.overrides[var]
        return float(inst.lb[var]), float(inst.ub[var])

    def arrays(self, inst: MipInstance) -> tuple[np.ndarray, np.ndarray]:
        lb = np.array(inst.lb, dtype=float)
        ub = np.array(inst.ub, dtype=float)
        for j, (lo, hi) in self.overrides.items():
            lb[j] = max(lb[j], lo)
            ub[j] = min(ub[j], hi)
        return lb, ub


@dataclass(eq=False)
class ReducedView:
    """Node-local problem: the instance with bounds applied and fixed variables removed."""

    base: MipInstance
    bounds: NodeBounds
    lb: np.ndarray
    ub: np.ndarray
    fixed: np.ndarray           # bool mask, lb == ub
    free_vars: np.ndarray       # indices with lb < ub
    active_rows: np.ndarray     # rows with at least one free variable
    residual_rhs: np.ndarray    # per row, rhs minus fixed contributions

    @property
    def fixed_values(self) -> np.ndarray:
        return np.where(self.fixed, self.lb, 0.0)

    def reduced_matrix(self, le_form=True):
        """Dense ``(A_red, b_red)`` over active rows x free columns.

        With ``le_form`` the >= rows are negated first (equality rows kept).
        """
        if le_form:
            A, b = self.base.le_form
            sign = np.array([-1.0 if s == GE else 1.0 for s in self.base.senses])
            res = self.residual_rhs * sign if self.base.m else self.residual_rhs
        else:
            A, res = self.base.A, self.residual_rhs
        return A[np.ix_(self.active_rows, self.free_vars)], res[self.active_rows]


def reduce(instance, bounds: NodeBounds | None = None) -> ReducedView:
    """Build the reduced formulation of ``instance`` under ``bounds``.

    ``instance`` may itself be a :class:`ReducedView`; its bounds are then
    combined with ``bounds`` (which makes the operation idempotent).
    """
    if isinstance(instance, ReducedView):
        base = instance.base
        merged = dict(instance.bounds.overrides)
        for j, (lo, hi) in (bounds.overrides.items() if bounds else ()):
            olo, ohi = merged.get(j, (base.lb[j], base.ub[j]))
            merged[j] = (max(olo, lo), min(ohi, hi))
        bounds = NodeBounds(merged)
        instance = base
    bounds = bounds or NodeBounds()
    lb, ub = bounds.arrays(instance)
    fixed = lb == ub
    free = np.flatnonzero(~fixed)
    if instance.m:
        A = instance.A
        xfix = np.where(fixed, lb, 0.0)
        residual = instance.rhs - A @ xfix
        active = np.flatnonzero(np.any(A[:, ~fixed] != 0, axis=1))
    else:
        residual = np.zeros(0)
        active = np.zeros(0, dtype=int)
    return ReducedView(instance, bounds, lb, ub, fixed, free, active, residual)
