"""Model formulas, tabular data, and design-matrix construction.

Formula grammar (whitespace insignificant)::

    formula   = response "~" termlist ( "|" termlist )?
    termlist  = term ( "+" term )*
    term      = "0" | "1" | identifier ( "^" integer )?

``1``/``0`` switch the intercept of the enclosing part on/off (on by
default).  The optional ``|`` separates the count-part terms from the
zero-hurdle terms of a two-part model; without it both parts share the same
terms.  Powers are integer powers of numeric columns, e.g. ``size^2``.

Categorical columns expand to treatment-contrast dummies against their first
level, named ``"var: level/reference"``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .families import DomainError
from .fitting import DesignMatrix


class ParseError(ValueError):
    code = "E_PARSE"

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class TableError(ValueError):
    code = "E_TABLE"


@dataclass(frozen=True)
class Term:
    variable: str
    power: int = 1


@dataclass(frozen=True)
class FormulaAst:
    response: str
    terms: tuple[Term, ...]
    intercept: bool = True
    zero_terms: tuple[Term, ...] | None = None  # hurdle part, if "|" given
    zero_intercept: bool = True

    def unparse(self) -> str:
        def side(terms, intercept):
            parts = [] if intercept else ["0"]
            parts += [
                t.variable if t.power == 1 else f"{t.variable}^{t.power}"
                for t in terms
            ]
            return " + ".join(parts) if parts else "1"

        out = f"{self.response} ~ {side(self.terms, self.intercept)}"
        if self.zero_terms is not None:
            out += f" | {side(self.zero_terms, self.zero_intercept)}"
        return out


def _tokenize(text: str):
    tokens = []  # (kind, value, offset)
    i = 0
    while i < len(text):
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c in "~+|^":
            tokens.append((c, c, i))
            i += 1
            continue
        if c.isdigit():
            j = i
            while j < len(text) and text[j].isdigit():
                j += 1
            tokens.append(("int", text[i:j], i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < len(text) and (text[j].isalnum() or text[j] in "._"):
                j += 1
            tokens.append(("ident", text[i:j], i))
            i = j
            continue
        raise ParseError(f"unknown token {c!r}", i)
    tokens.append(("end", "", len(text)))
    return tokens


def parse_formula(text: str) -> FormulaAst:
    """Parse a formula string; errors carry the byte offset of the problem."""
    if not text or not text.strip():
        raise ParseError("empty formula", 0)
    tokens = _tokenize(text)
    pos = 0

    def peek():
        return tokens[pos]

    def take(kind):
        nonlocal pos
        tok = tokens[pos]
        if tok[0] != kind:
            raise ParseError(f"expected {kind!r}, found {tok[1]!r}", tok[2])
        pos += 1
        return tok

    resp = take("ident")[1]
    if peek()[0] != "~":
        raise ParseError("expected '~' after the response", peek()[2])
    take("~")

    def termlist(response):
        terms = []
        intercept = True
        while True:
            tok = peek()
            if tok[0] == "int":
                take("int")
                if tok[1] == "1":
                    intercept = True
                elif tok[1] == "0":
                    intercept = False
                else:
                    raise ParseError(
                        f"bare integer {tok[1]!r} is not a term", tok[2]
                    )
            elif tok[0] == "ident":
                take("ident")
                power = 1
                if peek()[0] == "^":
                    take("^")
                    ptok = take("int")
                    power = int(ptok[1])
                    if power < 1:
                        raise ParseError("power must be positive", ptok[2])
                if tok[1] == response:
                    raise ParseError(
                        f"response {response!r} cannot appear among terms", tok[2]
                    )
                if any(t.variable == tok[1] and t.power == power for t in terms):
                    raise ParseError(
                        f"duplicate term {tok[1]!r}^{power}", tok[2]
                    )
                terms.append(Term(tok[1], power))
            else:
                raise ParseError(f"expected a term, found {tok[1]!r}", tok[2])
            if peek()[0] == "+":
                take("+")
                continue
            break
        return tuple(terms), intercept

    terms, intercept = termlist(resp)
    zero_terms = None
    zero_intercept = True
    if peek()[0] == "|":
        take("|")
        zero_terms, zero_intercept = termlist(resp)
    if peek()[0] != "end":
        raise ParseError(f"unexpected trailing {peek()[1]!r}", peek()[2])
    return FormulaAst(resp, terms, intercept, zero_terms, zero_intercept)


# ---------------------------------------------------------------------------
# DataTable
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Column:
    """Either numeric values, or categorical codes with ordered levels."""

    values: np.ndarray
    levels: tuple[str, ...] | None = None  # None means numeric

    @property
    def is_categorical(self) -> bool:
        return self.levels is not None


@dataclass(frozen=True)
class DataTable:
    columns: dict[str, Column]
    n_rows: int

    def __getitem__(self, name: str) -> Column:
        if name not in self.columns:
            raise TableError(f"no column named {name!r}")
        return self.columns[name]

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(self.columns)

    def numeric(self, name: str) -> np.ndarray:
        col = self[name]
        if col.is_categorical:
            raise TableError(f"column {name!r} is categorical")
        return col.values

    def subset(self, mask) -> "DataTable":
        cols = {
            name: Column(col.values[mask], col.levels)
            for name, col in self.columns.items()
        }
        n = len(next(iter(cols.values())).values) if cols else 0
        return DataTable(cols, n)


def _is_numeric(values) -> bool:
    try:
        for v in values:
            float(v)
    except ValueError:
        return False
    return True


def read_table(path, schema: dict | None = None) -> DataTable:
    """Read a headered CSV into a DataTable.

    Numeric columns are auto-detected; everything else becomes categorical
    with levels in order of first appearance.  ``schema`` overrides per
    column: ``{"col": {"type": "categorical", "levels": [...]}}`` pins an
    explicit level order (levels listed first become contrast references).
    If a ``<name>.schema.json`` sidecar sits next to the CSV it is loaded
    automatically; an explicit ``schema`` argument takes precedence.
    """
    path = Path(path)
    if schema is None:
        sidecar = path.with_suffix(".schema.json")
        if sidecar.exists():
            schema = json.loads(sidecar.read_text())
    columns_hint = (schema or {}).get("columns", schema or {})

    try:
        text = path.read_text()
    except OSError as exc:
        raise TableError(f"cannot read {path}: {exc}") from exc
    reader = csv.reader(text.splitlines())
    try:
        header = next(reader)
    except StopIteration:
        raise TableError(f"{path} is empty") from None
    raw = {name: [] for name in header}
    for rownum, row in enumerate(reader, start=2):
        if len(row) != len(header):
            raise TableError(
                f"{path}: row {rownum} has {len(row)} fields, expected {len(header)}"
            )
        for name, value in zip(header, row):
            if value == "":
                raise TableError(f"{path}: empty field in row {rownum}, column {name!r}")
            raw[name].append(value)

    cols = {}
    for name, values in raw.items():
        hint = columns_hint.get(name)
        levels = None
        if isinstance(hint, dict):
            if hint.get("type") == "categorical":
                levels = hint.get("levels")
        elif isinstance(hint, (list, tuple)):
            levels = list(hint)
        if levels is None and isinstance(hint, dict) and hint.get("type") == "numeric":
            if not _is_numeric(values):
                raise TableError(f"{path}: column {name!r} declared numeric but is not")
            cols[name] = Column(np.array([float(v) for v in values]))
            continue
        if levels is None and hint is None:
            if _is_numeric(values):
                cols[name] = Column(np.array([float(v) for v in values]))
                continue
        if levels is None:
            levels = list(dict.fromkeys(values))  # first-appearance order
        index = {lev: i for i, lev in enumerate(levels)}
        try:
            codes = np.array([index[v] for v in values], dtype=np.int64)
        except KeyError as exc:
            raise TableError(
                f"{path}: value {exc.args[0]!r} in column {name!r} is not "
                f"among the declared levels {levels}"
            ) from None
        cols[name] = Column(codes, tuple(levels))
    n = len(next(iter(raw.values()))) if raw else 0
    return DataTable(cols, n)


def _expand_term(term: Term, table: DataTable):
    """Columns and names contributed by one formula term."""
    col = table[term.variable]
    if col.is_categorical:
        if term.power != 1:
            raise TableError(
                f"cannot raise categorical column {term.variable!r} to a power"
            )
        reference = col.levels[0]
        names, arrays = [], []
        for code, level in enumerate(col.levels):
            if code == 0:
                continue
            names.append(f"{term.variable}: {level}/{reference}")
            arrays.append((col.values == code).astype(float))
        return names, arrays
    values = col.values.astype(float) ** term.power
    name = term.variable if term.power == 1 else f"{term.variable}^{term.power}"
    return [name], [values]


def _build_side(terms, intercept, table: DataTable) -> DesignMatrix:
    names = []
    arrays = []
    if intercept:
        names.append("(Intercept)")
        arrays.append(np.ones(table.n_rows))
    for term in terms:
        t_names, t_arrays = _expand_term(term, table)
        names.extend(t_names)
        arrays.extend(t_arrays)
    if not arrays:
        raise TableError("the design has no columns (no intercept, no terms)")
    for name, arr in zip(names, arrays):
        if name != "(Intercept)" and np.ptp(arr) == 0:
            raise TableError(f"column {name!r} is constant")
    return DesignMatrix(np.column_stack(arrays), tuple(names))


def build_design(ast: FormulaAst, table: DataTable):
    """Response vector and design matrix (matrices, for hurdle formulas).

    Returns ``(y, design)`` or ``(y, count_design, zero_design)`` when the
    formula has a ``|`` part.
    """
    resp = table[ast.response]
    if resp.is_categorical:
        raise TableError(f"response {ast.response!r} must be numeric")
    y = resp.values
    if np.any(y != np.floor(y)):
        raise TableError(f"response {ast.response!r} must be integer-valued")
    y = y.astype(np.int64)
    design = _build_side(ast.terms, ast.intercept, table)
    if ast.zero_terms is None:
        return y, design
    zero_design = _build_side(ast.zero_terms, ast.zero_intercept, table)
    return y, design, zero_design
