"""Load, type, encode, and preprocess heterogeneous tabular data.

Attribute types are declared, never inferred. Categorical labels are encoded
to 1..R_d by first appearance and the mapping is kept on the spec so decoding
is stable. The optional external preprocess offers exactly two transforms,
g1(x) = log(x + 1) for heavy right tails and g2(x) = log((100 - x) + 1) for
percentage-like attributes piled up near 100; completed outputs invert them.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "AttributeKind",
    "AttributeSpec",
    "DataMatrix",
    "decode_cell",
    "fit_transform_params",
    "fit_transforms",
    "format_cell",
    "load_dataset",
    "parse_attribute_spec",
    "render_csv",
]

PREPROCESS_TAGS = ("log1p", "reflected-log1p")


class AttributeKind(enum.Enum):
    """The five supported attribute types."""

    REAL = "real"
    POSITIVE_REAL = "positivereal"
    CATEGORICAL = "categorical"
    ORDINAL = "ordinal"
    COUNT = "count"

    @property
    def is_discrete_finite(self) -> bool:
        return self in (AttributeKind.CATEGORICAL, AttributeKind.ORDINAL)

    @property
    def is_continuous(self) -> bool:
        return self in (AttributeKind.REAL, AttributeKind.POSITIVE_REAL)

    @classmethod
    def from_tag(cls, tag: str) -> "AttributeKind":
        try:
            return cls(tag.strip().lower())
        except ValueError:
            raise ValueError(f"unknown attribute kind tag: {tag!r}") from None


@dataclass
class AttributeSpec:
    """Per-column metadata: kind, transform parameters, and category layout.

    w and mu shift/scale the pseudo-observation before the kind's mapping
    function; R_d is the category count for categorical/ordinal columns;
    labels records the raw-label-to-index encoding for categorical columns.
    """

    name: str
    kind: AttributeKind
    R_d: int | None = None
    w: float = 1.0
    mu: float = 0.0
    external_preprocess: str | None = None
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if not self.w > 0:
            raise ValueError(f"{self.name}: transform scale w must be > 0")
        if self.kind.is_discrete_finite:
            if self.R_d is None or self.R_d < 2:
                raise ValueError(f"{self.name}: {self.kind.value} needs R_d >= 2")
        elif self.R_d is not None:
            raise ValueError(f"{self.name}: R_d supplied for non-finite kind")
        if self.external_preprocess is not None:
            if self.external_preprocess not in PREPROCESS_TAGS:
                raise ValueError(
                    f"{self.name}: unknown preprocess {self.external_preprocess!r}"
                )
            if not self.kind.is_continuous:
                raise ValueError(
                    f"{self.name}: external preprocess only applies to "
                    "real/positive-real columns"
                )

    @property
    def S_d(self) -> int:
        """Pseudo-observation columns: R_d for categorical, 1 otherwise."""
        return self.R_d if self.kind is AttributeKind.CATEGORICAL else 1


@dataclass
class DataMatrix:
    """N x D observation table: encoded cells, missing mask, column specs.

    cells holds encoded values (labels mapped to 1..R_d, preprocess applied);
    missing marks absent entries (cells are nan there); raw preserves the
    source strings so completed tables round-trip untouched cells byte for
    byte. Read-only after construction.
    """

    cells: np.ndarray
    missing: np.ndarray
    specs: tuple[AttributeSpec, ...]
    raw: list[list[str]] | None = None

    def __post_init__(self):
        self.cells = np.asarray(self.cells, dtype=float)
        self.missing = np.asarray(self.missing, dtype=bool)
        if self.cells.shape != self.missing.shape:
            raise ValueError("cells and missing mask shapes differ")
        if self.cells.shape[1] != len(self.specs):
            raise ValueError("column count does not match spec count")
        self._validate_cells()

    @property
    def n_rows(self) -> int:
        return self.cells.shape[0]

    @property
    def n_cols(self) -> int:
        return self.cells.shape[1]

    def _validate_cells(self):
        for d, spec in enumerate(self.specs):
            col = self.cells[~self.missing[:, d], d]
            if col.size == 0:
                continue
            if spec.kind.is_discrete_finite:
                if np.any(col != np.round(col)) or col.min() < 1 or col.max() > spec.R_d:
                    raise ValueError(
                        f"{spec.name}: cells must be integers in 1..{spec.R_d}"
                    )
            elif spec.kind is AttributeKind.COUNT:
                if np.any(col != np.round(col)) or col.min() < 0:
                    raise ValueError(f"{spec.name}: count cells must be integers >= 0")
            elif spec.kind is AttributeKind.POSITIVE_REAL:
                decoded = np.array([decode_cell(spec, v) for v in col])
                if np.any(decoded <= 0):
                    raise ValueError(f"{spec.name}: positive-real cells must be > 0")


def parse_attribute_spec(text: str) -> list[AttributeSpec]:
    """Parse a column-spec document: one `name,kind[,R_d][,preprocess]` per line."""
    specs = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        fields = [f.strip() for f in line.split(",")]
        if len(fields) < 2:
            raise ValueError(f"spec line {lineno}: need at least name,kind")
        name = fields[0]
        kind = AttributeKind.from_tag(fields[1])
        extra = fields[2:]
        R_d = None
        preprocess = None
        if kind.is_discrete_finite:
            if not extra:
                raise ValueError(f"spec line {lineno}: {kind.value} needs R_d")
            try:
                R_d = int(extra[0])
            except ValueError:
                raise ValueError(f"spec line {lineno}: bad R_d {extra[0]!r}") from None
            extra = extra[1:]
        if extra:
            tag = extra.pop(0).lower()
            if tag != "none":
                if _is_number(tag):
                    raise ValueError(
                        f"spec line {lineno}: R_d supplied for {kind.value} column"
                    )
                preprocess = tag
        if extra:
            raise ValueError(f"spec line {lineno}: trailing fields {extra}")
        specs.append(
            AttributeSpec(name=name, kind=kind, R_d=R_d, external_preprocess=preprocess)
        )
    if not specs:
        raise ValueError("empty attribute spec document")
    return specs


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def _apply_preprocess(spec: AttributeSpec, x: float) -> float:
    if spec.external_preprocess == "log1p":
        if x <= -1:
            raise ValueError(f"{spec.name}: log1p needs values > -1, got {x}")
        return math.log1p(x)
    if spec.external_preprocess == "reflected-log1p":
        limit = 100.0 if spec.kind is AttributeKind.POSITIVE_REAL else 101.0
        if x >= limit:
            raise ValueError(
                f"{spec.name}: reflected-log1p needs values < {limit:g}, got {x}"
            )
        return math.log(101.0 - x)
    return x


def _invert_preprocess(spec: AttributeSpec, v: float) -> float:
    if spec.external_preprocess == "log1p":
        return math.expm1(v)
    if spec.external_preprocess == "reflected-log1p":
        return 101.0 - math.exp(v)
    return v


def load_dataset(
    csv_text: str,
    specs: list[AttributeSpec] | tuple[AttributeSpec, ...],
    missing_sentinel: str = "",
) -> DataMatrix:
    """Encode an RFC-4180 CSV document (header row required) into a DataMatrix.

    A cell is missing when it is empty or equals missing_sentinel exactly.
    Deterministic: identical inputs produce an identical DataMatrix.
    """
    reader = csv.reader(io.StringIO(csv_text))
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError("empty CSV document") from None
    names = [s.name for s in specs]
    if [h.strip() for h in header] != names:
        raise ValueError(f"CSV header {header} does not match spec names {names}")

    rows = [row for row in reader if row]
    if not rows:
        raise ValueError("CSV contains no data rows")
    N, D = len(rows), len(specs)
    cells = np.full((N, D), np.nan)
    missing = np.zeros((N, D), dtype=bool)
    label_maps: list[dict[str, int]] = [{} for _ in range(D)]

    for i, row in enumerate(rows):
        if len(row) != D:
            raise ValueError(f"row {i + 2}: expected {D} fields, got {len(row)}")
        for d, cell in enumerate(row):
            if cell == "" or (missing_sentinel != "" and cell == missing_sentinel):
                missing[i, d] = True
                continue
            cells[i, d] = _encode_cell(specs[d], cell, label_maps[d], i + 2)

    out_specs = tuple(
        replace(spec, labels=tuple(label_maps[d]) if label_maps[d] else spec.labels)
        for d, spec in enumerate(specs)
    )
    return DataMatrix(cells=cells, missing=missing, specs=out_specs, raw=rows)


def _encode_cell(spec: AttributeSpec, cell: str, label_map: dict, rowno: int) -> float:
    kind = spec.kind
    if kind is AttributeKind.CATEGORICAL:
        if cell not in label_map:
            if len(label_map) == spec.R_d:
                raise ValueError(
                    f"{spec.name} row {rowno}: label {cell!r} exceeds R_d={spec.R_d}"
                )
            label_map[cell] = len(label_map) + 1
        return float(label_map[cell])
    if kind is AttributeKind.ORDINAL:
        v = _parse_number(spec, cell, rowno)
        if v != int(v) or not 1 <= v <= spec.R_d:
            raise ValueError(
                f"{spec.name} row {rowno}: ordinal cells must be integers "
                f"in 1..{spec.R_d}, got {cell!r}"
            )
        return float(int(v))
    if kind is AttributeKind.COUNT:
        v = _parse_number(spec, cell, rowno)
        if v != int(v) or v < 0:
            raise ValueError(
                f"{spec.name} row {rowno}: count cells must be integers >= 0, "
                f"got {cell!r}"
            )
        return float(int(v))
    v = _parse_number(spec, cell, rowno)
    if kind is AttributeKind.POSITIVE_REAL and v <= 0:
        raise ValueError(f"{spec.name} row {rowno}: must be > 0, got {cell!r}")
    return _apply_preprocess(spec, v)


def _parse_number(spec: AttributeSpec, cell: str, rowno: int) -> float:
    try:
        return float(cell)
    except ValueError:
        raise ValueError(
            f"{spec.name} row {rowno}: non-numeric value {cell!r}"
        ) from None


def fit_transform_params(values, missing_mask, kind: AttributeKind) -> tuple[float, float]:
    """Fit (w, mu) from a column's non-missing encoded values.

    Real: mu = mean, w = std, so the pseudo-observation (x - mu)/w is the
    z-score. PositiveReal/Count: mu = min, w = std/2. Categorical/Ordinal:
    (1, 0), unused. Sample std uses divisor N-1.
    """
    if kind.is_discrete_finite:
        return 1.0, 0.0
    obs = np.asarray(values, dtype=float)[~np.asarray(missing_mask, dtype=bool)]
    if obs.size < 2:
        raise ValueError("need at least 2 non-missing values to fit transforms")
    std = float(np.std(obs, ddof=1))
    if std == 0:
        raise ValueError("degenerate column: standard deviation is 0")
    if kind is AttributeKind.REAL:
        return std, float(np.mean(obs))
    return std / 2.0, float(np.min(obs))


def fit_transforms(data: DataMatrix) -> DataMatrix:
    """Return a copy of `data` whose specs carry fitted (w, mu) per column."""
    new_specs = []
    for d, spec in enumerate(data.specs):
        w, mu = fit_transform_params(data.cells[:, d], data.missing[:, d], spec.kind)
        new_specs.append(replace(spec, w=w, mu=mu))
    return DataMatrix(
        cells=data.cells, missing=data.missing, specs=tuple(new_specs), raw=data.raw
    )


def decode_cell(spec: AttributeSpec, encoded: float):
    """Map an encoded cell back to original units/labels."""
    kind = spec.kind
    if kind is AttributeKind.CATEGORICAL:
        idx = int(encoded)
        if spec.labels is not None and 1 <= idx <= len(spec.labels):
            return spec.labels[idx - 1]
        return idx
    if kind is AttributeKind.ORDINAL or kind is AttributeKind.COUNT:
        return int(encoded)
    return _invert_preprocess(spec, float(encoded))


def format_cell(spec: AttributeSpec, decoded) -> str:
    """Deterministic string form of a decoded value for CSV output."""
    if isinstance(decoded, str):
        return decoded
    if isinstance(decoded, (int, np.integer)):
        return str(int(decoded))
    return repr(float(decoded))


def render_csv(data: DataMatrix, fill: np.ndarray | None = None) -> str:
    """Write a DataMatrix back to CSV text.

    Observed cells reuse their source strings when available so untouched
    values round-trip unchanged. Missing cells are left empty, or decoded
    from `fill` (an N x D array of encoded values) when given.
    """
    if fill is not None:
        fill = np.asarray(fill, dtype=float)
        if fill.shape != data.cells.shape:
            raise ValueError("fill shape does not match data shape")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([s.name for s in data.specs])
    for i in range(data.n_rows):
        row = []
        for d, spec in enumerate(data.specs):
            if not data.missing[i, d]:
                if data.raw is not None:
                    row.append(data.raw[i][d])
                else:
                    row.append(format_cell(spec, decode_cell(spec, data.cells[i, d])))
            elif fill is None:
                row.append("")
            else:
                row.append(format_cell(spec, decode_cell(spec, fill[i, d])))
        writer.writerow(row)
    return buf.getvalue()
