"""Mixed-type data matrix: type tags, CSV I/O, validation and column intercepts."""
from __future__ import annotations

import csv
import enum
import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .mathcore import logit, std_normal_quantile

log = logging.getLogger(__name__)

PROPORTION_EPS = 1e-6
INTERCEPT_EPS = 0.01


class DataError(ValueError):
    pass


class Kind(enum.IntEnum):
    """Data-type code; the integer value is the type index used in the model."""

    BINARY = 1
    ORDINAL = 2
    PROPORTION = 3
    CONTINUOUS = 4
    COUNT = 5


@dataclass(frozen=True)
class ColumnType:
    kind: Kind
    levels: int | None = None

    def __post_init__(self):
        if self.kind is Kind.ORDINAL:
            if self.levels is None or self.levels < 2:
                raise DataError("ordinal columns need at least 2 levels")
        elif self.levels is not None:
            raise DataError(f"{self.kind.name.lower()} columns take no level count")

    @property
    def tag(self) -> str:
        if self.kind is Kind.ORDINAL:
            return f"ordinal:{self.levels}"
        return self.kind.name.lower()

    @classmethod
    def parse(cls, tag: str) -> "ColumnType":
        tag = tag.strip().lower()
        if tag.startswith("ordinal:"):
            try:
                levels = int(tag.split(":", 1)[1])
            except ValueError:
                raise DataError(f"bad ordinal tag {tag!r}") from None
            return cls(Kind.ORDINAL, levels)
        try:
            kind = Kind[tag.upper()]
        except KeyError:
            raise DataError(f"unknown type tag {tag!r}") from None
        if kind is Kind.ORDINAL:
            raise DataError("ordinal tag must carry its level count, e.g. ordinal:5")
        return cls(kind)

    def __str__(self) -> str:
        return self.tag


BINARY = ColumnType(Kind.BINARY)
COUNT = ColumnType(Kind.COUNT)
PROPORTION = ColumnType(Kind.PROPORTION)
CONTINUOUS = ColumnType(Kind.CONTINUOUS)


def ordinal(levels: int) -> ColumnType:
    return ColumnType(Kind.ORDINAL, levels)


def _column_ok(ctype: ColumnType, x: np.ndarray) -> np.ndarray:
    ok = np.isfinite(x)
    k = ctype.kind
    if k is Kind.BINARY:
        ok &= (x == 0) | (x == 1)
    elif k is Kind.ORDINAL:
        ok &= (x == np.round(x)) & (x >= 1) & (x <= ctype.levels)
    elif k is Kind.COUNT:
        ok &= (x == np.round(x)) & (x >= 0)
    elif k is Kind.PROPORTION:
        ok &= (x > 0) & (x < 1)
    return ok


def _column_error(ctype: ColumnType, v: float) -> str | None:
    if not np.isfinite(v):
        return "value is missing or not finite"
    k = ctype.kind
    if k is Kind.BINARY and v not in (0.0, 1.0):
        return "binary ∉ {0,1}"
    if k is Kind.ORDINAL and (v != int(v) or not 1 <= v <= ctype.levels):
        return f"ordinal ∉ {{1,…,{ctype.levels}}}"
    if k is Kind.COUNT and (v != int(v) or v < 0):
        return "count is not a non-negative integer"
    if k is Kind.PROPORTION and not 0.0 < v < 1.0:
        return "proportion ∉ (0,1)"
    return None


@dataclass(frozen=True, eq=False)
class MixedMatrix:
    """n x p matrix whose columns each carry a :class:`ColumnType`.

    ``values`` is stored as a read-only float array. ``clamped`` counts
    proportion entries that were pulled in from the {0, 1} boundary at load.
    """

    values: np.ndarray
    types: tuple[ColumnType, ...]
    names: tuple[str, ...] = ()
    clamped: int = field(default=0, compare=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise DataError("values must be a 2-d array")
        n, p = values.shape
        if n < 2 or p < 2:
            raise DataError(f"need n >= 2 and p >= 2, got n={n}, p={p}")
        types = tuple(self.types)
        if len(types) != p:
            raise DataError(f"{len(types)} type tags for {p} columns")
        names = tuple(self.names) if self.names else tuple(f"x{j + 1}" for j in range(p))
        if len(names) != p:
            raise DataError(f"{len(names)} names for {p} columns")
        for j, t in enumerate(types):
            bad = np.flatnonzero(~_column_ok(t, values[:, j]))
            if bad.size:
                i = bad[0]
                raise DataError(f"row {i + 1}, column {j + 1}: {_column_error(t, values[i, j])}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "types", types)
        object.__setattr__(self, "names", names)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def columns_of(self, kind: Kind) -> np.ndarray:
        return np.array([j for j, t in enumerate(self.types) if t.kind is kind], dtype=np.int64)

    @property
    def kinds(self) -> np.ndarray:
        return np.array([int(t.kind) for t in self.types], dtype=np.int64)

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update("\x1f".join(t.tag for t in self.types).encode())
        h.update(b"\x1e")
        h.update("\x1f".join(self.names).encode())
        h.update(b"\x1e")
        h.update(np.ascontiguousarray(self.values, dtype="<f8").tobytes())
        return h.hexdigest()

    def __eq__(self, other):
        if not isinstance(other, MixedMatrix):
            return NotImplemented
        return (
            self.types == other.types
            and self.names == other.names
            and np.array_equal(self.values, other.values)
        )


def clamp_proportions(values: np.ndarray, eps: float = PROPORTION_EPS) -> tuple[np.ndarray, int]:
    out = np.clip(values, eps, 1.0 - eps)
    return out, int(np.count_nonzero(out != values))


def load_csv(path: str | Path) -> MixedMatrix:
    """Read a type-tagged CSV: header row, type-tag row, then numeric rows.

    Proportion values outside [1e-6, 1 - 1e-6] are clamped into that range;
    the number of clamped entries is stored on the result and logged.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise DataError(f"{path}: need a header row and a type-tag row")
    names = [s.strip() for s in rows[0]]
    p = len(names)
    if len(rows[1]) != p:
        raise DataError(f"row 2: expected {p} type tags, found {len(rows[1])}")
    types = []
    for j, tag in enumerate(rows[1]):
        try:
            types.append(ColumnType.parse(tag))
        except DataError as exc:
            raise DataError(f"row 2, column {j + 1}: {exc}") from None

    body = rows[2:]
    values = np.empty((len(body), p))
    clamped = 0
    for r, row in enumerate(body):
        lineno = r + 3
        if len(row) != p:
            raise DataError(f"row {lineno}: expected {p} fields, found {len(row)} (ragged row)")
        for j, cell in enumerate(row):
            cell = cell.strip()
            try:
                v = float(cell) if cell else float("nan")
            except ValueError:
                raise DataError(f"row {lineno}, column {j + 1}: not a number: {cell!r}") from None
            if types[j].kind is Kind.PROPORTION and np.isfinite(v) and 0.0 <= v <= 1.0:
                c = min(max(v, PROPORTION_EPS), 1.0 - PROPORTION_EPS)
                clamped += c != v
                v = c
            msg = _column_error(types[j], v)
            if msg:
                raise DataError(f"row {lineno}, column {j + 1}: {msg}")
            values[r, j] = v
    if clamped:
        log.warning("%s: clamped %d proportion value(s) into [%g, 1-%g]",
                    path, clamped, PROPORTION_EPS, PROPORTION_EPS)
    return MixedMatrix(values, tuple(types), tuple(names), clamped=clamped)


def _format(v: float, ctype: ColumnType) -> str:
    if ctype.kind in (Kind.BINARY, Kind.ORDINAL, Kind.COUNT):
        return str(int(v))
    return repr(float(v))


def save_csv(m: MixedMatrix, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(m.names)
        w.writerow([t.tag for t in m.types])
        for row in m.values:
            w.writerow([_format(v, t) for v, t in zip(row, m.types)])


def compute_intercepts(m: MixedMatrix, eps0: float = INTERCEPT_EPS) -> np.ndarray:
    """Fixed per-column intercepts alpha_j that centre each column on the latent scale.

    binary      mean of Phi^-1((x + eps0) / (1 + 2 eps0))
    ordinal     mean of Phi^-1((x + eps0) / (L + 2 eps0))
    count       log(mean(x) + eps0)
    continuous  mean(x)
    proportion  mean(logit(x))
    """
    alpha = np.empty(m.p)
    for j, t in enumerate(m.types):
        x = m.values[:, j]
        if t.kind is Kind.BINARY:
            alpha[j] = np.mean(std_normal_quantile((x + eps0) / (1 + 2 * eps0)))
        elif t.kind is Kind.ORDINAL:
            alpha[j] = np.mean(std_normal_quantile((x + eps0) / (t.levels + 2 * eps0)))
        elif t.kind is Kind.COUNT:
            alpha[j] = np.log(np.mean(x) + eps0)
        elif t.kind is Kind.CONTINUOUS:
            alpha[j] = np.mean(x)
        else:
            alpha[j] = np.mean(logit(x))
    return alpha
