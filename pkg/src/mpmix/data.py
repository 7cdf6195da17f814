"""Mixed-type datasets, model specifications and partitions.

Block and component indices are 0-based inside the library. Everything that
leaves the library (JSON, tables, CSV label files) is written 1-based.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

log = logging.getLogger(__name__)

CONTINUOUS_FAMILY = "continuous"
COUNT_FAMILY = "count"
BINARY_FAMILY = "binary"
CATEGORICAL_FAMILY = "categorical"
FAMILIES = (CONTINUOUS_FAMILY, COUNT_FAMILY, BINARY_FAMILY, CATEGORICAL_FAMILY)

# kernel codes: binary shares the categorical machinery with two levels
GAUSSIAN_CODE, POISSON_CODE, CATEGORICAL_CODE = 0, 1, 2

_INT_RE = re.compile(r"^\+?\d+$")


class DataError(ValueError):
    """Raised when input data does not conform to its declared schema."""


class ModelError(ValueError):
    """Raised for malformed model specifications."""


@dataclass(frozen=True)
class VariableKind:
    family: str
    levels: int | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown variable kind {self.family!r}")
        if self.family == BINARY_FAMILY:
            object.__setattr__(self, "levels", 2)
        elif self.family == CATEGORICAL_FAMILY:
            if self.levels is None or self.levels < 2:
                raise ValueError("categorical variables need at least 2 levels")
        elif self.levels is not None:
            raise ValueError(f"{self.family} variables carry no levels")

    @property
    def is_discrete(self) -> bool:
        """True for binary and categorical variables."""
        return self.family in (BINARY_FAMILY, CATEGORICAL_FAMILY)

    @property
    def code(self) -> int:
        if self.family == CONTINUOUS_FAMILY:
            return GAUSSIAN_CODE
        if self.family == COUNT_FAMILY:
            return POISSON_CODE
        return CATEGORICAL_CODE

    @property
    def n_params(self) -> int:
        """Free parameters of one component margin."""
        if self.family == CONTINUOUS_FAMILY:
            return 2
        if self.family == COUNT_FAMILY:
            return 1
        return self.levels - 1

    def __str__(self):
        if self.family == CATEGORICAL_FAMILY:
            return f"categorical({self.levels})"
        return self.family


CONTINUOUS = VariableKind(CONTINUOUS_FAMILY)
COUNT = VariableKind(COUNT_FAMILY)
BINARY = VariableKind(BINARY_FAMILY)


def categorical(levels: int) -> VariableKind:
    return VariableKind(CATEGORICAL_FAMILY, levels)


@dataclass(frozen=True, eq=False)
class DataSet:
    """An n x d table of typed columns.

    Continuous columns are float64, counts int64, and binary/categorical
    columns hold integer codes 0..m-1. ``encodings[j]`` lists the original
    tokens of a categorical column in code order (first appearance unless
    the schema fixed the order); it is None for the other kinds.
    """

    columns: tuple
    kinds: tuple
    names: tuple
    encodings: tuple = None

    def __post_init__(self):
        cols = tuple(np.asarray(c) for c in self.columns)
        kinds = tuple(self.kinds)
        names = tuple(str(s) for s in self.names)
        encodings = self.encodings
        if encodings is None:
            encodings = tuple(
                tuple(str(h) for h in range(k.levels)) if k.is_discrete else None for k in kinds
            )
        encodings = tuple(None if e is None else tuple(e) for e in encodings)
        if not cols:
            raise DataError("a dataset needs at least one column")
        if not (len(cols) == len(kinds) == len(names) == len(encodings)):
            raise DataError("columns, kinds, names and encodings differ in length")
        n = len(cols[0])
        if n < 1:
            raise DataError("a dataset needs at least one row")
        if len(set(names)) != len(names):
            raise DataError("duplicate column names")
        checked = []
        for j, (col, kind) in enumerate(zip(cols, kinds)):
            if col.ndim != 1 or len(col) != n:
                raise DataError(f"column {names[j]!r} has length {len(col)}, expected {n}")
            checked.append(_coerce_column(col, kind, names[j]))
            if kind.is_discrete and len(encodings[j]) != kind.levels:
                raise DataError(f"column {names[j]!r}: encoding does not list {kind.levels} levels")
        object.__setattr__(self, "columns", tuple(checked))
        object.__setattr__(self, "kinds", kinds)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "encodings", encodings)

    @property
    def n(self) -> int:
        return len(self.columns[0])

    @property
    def d(self) -> int:
        return len(self.columns)

    @cached_property
    def matrix(self) -> np.ndarray:
        """All columns as one float64 (n, d) array (codes for discrete kinds)."""
        m = np.column_stack([c.astype(np.float64) for c in self.columns])
        m.flags.writeable = False
        return m

    @cached_property
    def kind_codes(self) -> np.ndarray:
        return np.array([k.code for k in self.kinds], dtype=np.int64)

    @cached_property
    def level_counts(self) -> np.ndarray:
        return np.array([k.levels or 0 for k in self.kinds], dtype=np.int64)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def subset(self, cols: Sequence[int]) -> DataSet:
        cols = list(cols)
        return DataSet(
            tuple(self.columns[j] for j in cols),
            tuple(self.kinds[j] for j in cols),
            tuple(self.names[j] for j in cols),
            tuple(self.encodings[j] for j in cols),
        )

    def tokens(self, j: int) -> list[str]:
        """Column j rendered back to the text tokens it was read from."""
        col, kind = self.columns[j], self.kinds[j]
        if kind.family == CONTINUOUS_FAMILY:
            return [repr(float(v)) for v in col]
        if kind.family == COUNT_FAMILY:
            return [str(int(v)) for v in col]
        enc = self.encodings[j]
        return [enc[int(v)] for v in col]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "d": self.d,
            "names": list(self.names),
            "kinds": [str(k) for k in self.kinds],
            "encodings": [None if e is None else list(e) for e in self.encodings],
            "columns": [self.tokens(j) for j in range(self.d)],
        }

    @classmethod
    def from_dict(cls, obj: Mapping) -> DataSet:
        kinds = [parse_kind(k) for k in obj["kinds"]]
        cols = []
        for tokens, kind, enc, name in zip(obj["columns"], kinds, obj["encodings"], obj["names"]):
            if kind.is_discrete:
                lookup = {t: h for h, t in enumerate(enc)}
                cols.append(np.array([lookup[t] for t in tokens], dtype=np.int64))
            else:
                cols.append(_parse_numeric(tokens, kind, name))
        return cls(tuple(cols), tuple(kinds), tuple(obj["names"]), tuple(obj["encodings"]))


def _coerce_column(col: np.ndarray, kind: VariableKind, name: str) -> np.ndarray:
    if kind.family == CONTINUOUS_FAMILY:
        out = np.array(col, dtype=np.float64)
        bad = ~np.isfinite(out)
        if bad.any():
            i = int(np.argmax(bad))
            raise DataError(f"row {i + 1}, column {name!r}: non-finite value {out[i]!r}")
    else:
        raw = np.asarray(col)
        out = np.array(raw, dtype=np.int64)
        if raw.dtype.kind == "f":
            bad = raw != out
            if bad.any():
                i = int(np.argmax(bad))
                raise DataError(f"row {i + 1}, column {name!r}: {raw[i]!r} is not an integer")
        hi = kind.levels if kind.is_discrete else None
        bad = (out < 0) | ((out >= hi) if hi is not None else False)
        if np.any(bad):
            i = int(np.argmax(bad))
            raise DataError(f"row {i + 1}, column {name!r}: value {out[i]} outside {kind}")
    out.flags.writeable = False
    return out


def parse_kind(spec) -> VariableKind:
    """Parse a schema entry: a kind name, ``categorical(m)``, or a dict."""
    if isinstance(spec, VariableKind):
        return spec
    if isinstance(spec, Mapping):
        family = spec["kind"]
        if family == CATEGORICAL_FAMILY:
            levels = spec.get("levels")
            m = len(levels) if isinstance(levels, (list, tuple)) else levels
            return categorical(int(m))
        return parse_kind(family)
    text = str(spec).strip().lower()
    m = re.fullmatch(r"categorical\((\d+)\)", text)
    if m:
        return categorical(int(m.group(1)))
    if text in (CONTINUOUS_FAMILY, COUNT_FAMILY, BINARY_FAMILY):
        return VariableKind(text)
    raise DataError(f"unknown kind {spec!r}")


def _parse_numeric(tokens: Sequence[str], kind: VariableKind, name: str) -> np.ndarray:
    if kind.family == CONTINUOUS_FAMILY:
        out = np.empty(len(tokens), dtype=np.float64)
        for i, t in enumerate(tokens):
            try:
                out[i] = float(t)
            except ValueError:
                raise DataError(f"row {i + 1}, column {name!r}: {t!r} is not a number") from None
            if not math.isfinite(out[i]):
                raise DataError(f"row {i + 1}, column {name!r}: non-finite value {t!r}")
        return out
    out = np.empty(len(tokens), dtype=np.int64)
    for i, t in enumerate(tokens):
        if not _INT_RE.match(t):
            raise DataError(f"row {i + 1}, column {name!r}: {t!r} is not a non-negative integer")
        out[i] = int(t)
        if kind.family == BINARY_FAMILY and out[i] > 1:
            raise DataError(f"row {i + 1}, column {name!r}: binary value must be 0 or 1, got {t!r}")
    return out


def _is_number(token: str) -> bool:
    try:
        return math.isfinite(float(token))
    except ValueError:
        return False


def _auto_kind(tokens: Sequence[str], name: str) -> str:
    distinct = set(tokens)
    if not all(_is_number(t) for t in distinct):
        if len(distinct) <= 10:
            return CATEGORICAL_FAMILY
        raise DataError(f"column {name!r}: {len(distinct)} distinct non-numeric tokens; declare its kind")
    if all(_INT_RE.match(t) for t in distinct) and len(distinct) > 10:
        return COUNT_FAMILY
    return CONTINUOUS_FAMILY


def load_schema(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def load_dataset(csv_path, schema: Mapping | str | Path | None = None) -> DataSet:
    """Read a headed CSV and type its columns.

    ``schema`` maps column name to ``continuous``, ``count``, ``binary``,
    ``categorical``, ``auto`` or ``ignore``; a dict entry
    ``{"kind": "categorical", "levels": [...]}`` fixes the level order.
    Columns missing from the schema are resolved as ``auto``.
    """
    if isinstance(schema, (str, Path)):
        schema = load_schema(schema)
    schema = dict(schema or {})
    try:
        with open(csv_path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {csv_path}: {exc}") from exc
    if not rows:
        raise DataError(f"{csv_path}: empty file")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if r]
    if not body:
        raise DataError(f"{csv_path}: no data rows")
    for i, r in enumerate(body):
        if len(r) != len(header):
            raise DataError(f"row {i + 1}: expected {len(header)} fields, found {len(r)}")
    unknown = set(schema) - set(header)
    if unknown:
        raise DataError(f"schema names columns absent from the file: {sorted(unknown)}")

    columns, kinds, names, encodings = [], [], [], []
    for j, name in enumerate(header):
        entry = schema.get(name, "auto")
        if entry == "ignore":
            continue
        tokens = [r[j].strip() for r in body]
        for i, t in enumerate(tokens):
            if t == "" or t.upper() in ("NA", "NAN", "?"):
                raise DataError(f"row {i + 1}, column {name!r}: missing value {t!r}")
        if entry == "auto":
            entry = _auto_kind(tokens, name)
        fixed_levels = entry.get("levels") if isinstance(entry, Mapping) else None
        family = entry["kind"] if isinstance(entry, Mapping) else str(entry).split("(")[0].strip().lower()
        if family == CATEGORICAL_FAMILY:
            if isinstance(fixed_levels, (list, tuple)):
                levels = [str(t) for t in fixed_levels]
            else:
                levels = list(dict.fromkeys(tokens))
            lookup = {t: h for h, t in enumerate(levels)}
            codes = np.empty(len(tokens), dtype=np.int64)
            for i, t in enumerate(tokens):
                if t not in lookup:
                    raise DataError(f"row {i + 1}, column {name!r}: undeclared level {t!r}")
                codes[i] = lookup[t]
            if len(levels) < 2:
                raise DataError(f"column {name!r}: a categorical column needs 2 or more levels")
            kind = categorical(len(levels))
            columns.append(codes)
            encodings.append(tuple(levels))
        else:
            kind = parse_kind(family)
            columns.append(_parse_numeric(tokens, kind, name))
            encodings.append(("0", "1") if kind.family == BINARY_FAMILY else None)
        kinds.append(kind)
        names.append(name)
    if not columns:
        raise DataError("no columns left after applying the schema")
    return DataSet(tuple(columns), tuple(kinds), tuple(names), tuple(encodings))


def write_csv(data: DataSet, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(data.names)
        cols = [data.tokens(j) for j in range(data.d)]
        for i in range(data.n):
            w.writerow([c[i] for c in cols])


def schema_of(data: DataSet) -> dict:
    out = {}
    for name, kind, enc in zip(data.names, data.kinds, data.encodings):
        if kind.family == CATEGORICAL_FAMILY:
            out[name] = {"kind": CATEGORICAL_FAMILY, "levels": list(enc)}
        else:
            out[name] = kind.family
    return out


@dataclass(frozen=True)
class ModelSpec:
    """Block structure m = (B, G, omega); ``omega[j]`` is a 0-based block index."""

    G: tuple
    omega: tuple

    def __post_init__(self):
        object.__setattr__(self, "G", tuple(int(g) for g in self.G))
        object.__setattr__(self, "omega", tuple(int(w) for w in self.omega))
        if len(self.G) < 1:
            raise ModelError("a model needs at least one block")

    @property
    def B(self) -> int:
        return len(self.G)

    @property
    def d(self) -> int:
        return len(self.omega)

    def members(self, b: int) -> list[int]:
        return [j for j, w in enumerate(self.omega) if w == b]

    def blocks(self) -> list[list[int]]:
        return [self.members(b) for b in range(self.B)]

    def to_dict(self) -> dict:
        return {"B": self.B, "G": list(self.G), "omega": [w + 1 for w in self.omega]}

    @classmethod
    def from_dict(cls, obj: Mapping) -> ModelSpec:
        return cls(tuple(obj["G"]), tuple(w - 1 for w in obj["omega"]))


def validate_model(spec: ModelSpec, data: DataSet) -> tuple[ModelSpec, list[str]]:
    """Check a finalized spec against a dataset; return it with warnings."""
    if spec.d != data.d:
        raise ModelError(f"omega has length {spec.d} but the data has {data.d} columns")
    for j, w in enumerate(spec.omega):
        if not 0 <= w < spec.B:
            raise ModelError(f"variable {data.names[j]!r}: block index {w + 1} outside 1..{spec.B}")
    for b, g in enumerate(spec.G):
        if g < 1:
            raise ModelError(f"block {b + 1}: G must be at least 1, got {g}")
    warnings = []
    for b, members in enumerate(spec.blocks()):
        if not members:
            raise ModelError(f"block {b + 1} is empty")
        if spec.G[b] > 1 and all(data.kinds[j].is_discrete for j in members):
            warnings.append(
                f"block {b + 1}: {spec.G[b]} components over binary/categorical variables only; "
                "the mixture may not be identifiable"
            )
    for msg in warnings:
        log.warning(msg)
    return spec, warnings


def block_order(spec: ModelSpec) -> list[int]:
    """Old block indices listed in canonical order.

    Blocks are ordered by their smallest member variable; empty blocks go
    last in their original order.
    """
    first = {}
    for j, w in enumerate(spec.omega):
        first.setdefault(w, j)
    used = sorted(first, key=first.get)
    return used + [b for b in range(spec.B) if b not in first]


def canonicalize_model(spec: ModelSpec) -> ModelSpec:
    order = block_order(spec)
    new_index = {old: new for new, old in enumerate(order)}
    return ModelSpec(tuple(spec.G[b] for b in order), tuple(new_index[w] for w in spec.omega))


@dataclass
class Theta:
    """Mixture parameters.

    ``pi[b]`` is the proportion vector of block b. ``alpha[j]`` is a
    (G_{omega_j}, p_j) array: (mean, variance) rows for continuous
    variables, a single rate for counts, level probabilities for
    binary/categorical variables.
    """

    pi: tuple
    alpha: tuple

    def to_dict(self, spec: ModelSpec, data: DataSet) -> dict:
        variables = {}
        for j, a in enumerate(self.alpha):
            kind = data.kinds[j]
            if kind.family == CONTINUOUS_FAMILY:
                variables[data.names[j]] = {"mean": a[:, 0].tolist(), "variance": a[:, 1].tolist()}
            elif kind.family == COUNT_FAMILY:
                variables[data.names[j]] = {"rate": a[:, 0].tolist()}
            else:
                variables[data.names[j]] = {"probabilities": a.tolist(), "levels": list(data.encodings[j])}
        return {"pi": [p.tolist() for p in self.pi], "variables": variables}


@dataclass
class MultiPartition:
    """One hard partition per block; ``labels[b]`` holds 0-based components."""

    labels: tuple
    G: tuple = field(default=None)

    def __post_init__(self):
        self.labels = tuple(np.asarray(z, dtype=np.int64) for z in self.labels)
        if self.G is None:
            self.G = tuple(int(z.max()) + 1 if len(z) else 1 for z in self.labels)
        self.G = tuple(int(g) for g in self.G)
        if len(self.G) != len(self.labels):
            raise ModelError("one component count per block is required")
        n = {len(z) for z in self.labels}
        if len(n) > 1:
            raise ModelError("partitions of different lengths")
        for b, (z, g) in enumerate(zip(self.labels, self.G)):
            if len(z) and (z.min() < 0 or z.max() >= g):
                raise ModelError(f"block {b + 1}: labels outside 1..{g}")

    @property
    def B(self) -> int:
        return len(self.labels)

    def to_lists(self) -> list[list[int]]:
        return [(z + 1).tolist() for z in self.labels]


def reduce_spec(spec: ModelSpec) -> tuple[ModelSpec, list[int]]:
    """Collapse a spec reached during search to its effective structure.

    Variables of every single-component block move to the first such block
    (all single-component blocks describe the same model), empty blocks are
    dropped and the result is canonicalized. Also returns, for each new
    block, the old block index it came from.
    """
    omega = list(spec.omega)
    trivial = [b for b in range(spec.B) if spec.G[b] == 1 and b in omega]
    if len(trivial) > 1:
        omega = [trivial[0] if w in trivial else w for w in omega]
    merged = ModelSpec(spec.G, tuple(omega))
    order = [b for b in block_order(merged) if b in omega]
    new_index = {old: new for new, old in enumerate(order)}
    reduced = ModelSpec(tuple(spec.G[b] for b in order), tuple(new_index[w] for w in omega))
    return reduced, order
