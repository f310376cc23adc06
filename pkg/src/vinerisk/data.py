"""Tabular data model: variable schemas and validated datasets.

A :class:`Schema` declares each modeled variable as either continuous or
ordinal (positive integer codes ``1..levels``), plus optional label and
auxiliary columns.  A :class:`Dataset` is a schema-validated numeric table;
missing values are rejected rather than imputed.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    EmptyDataset,
    MissingColumn,
    MissingValue,
    NonNumericCell,
    OrdinalOutOfRange,
    SchemaError,
)

CONTINUOUS = "continuous"
ORDINAL = "ordinal"


@dataclass(frozen=True)
class VariableSpec:
    """Declaration of a single modeled variable."""

    name: str
    kind: str
    levels: Optional[int] = None

    def __post_init__(self):
        if not self.name:
            raise SchemaError("variable name must be nonempty")
        if self.kind not in (CONTINUOUS, ORDINAL):
            raise SchemaError(f"unknown variable kind {self.kind!r}")
        if self.kind == ORDINAL:
            if self.levels is None or int(self.levels) < 2:
                raise SchemaError(
                    f"ordinal variable {self.name!r} needs levels >= 2"
                )
        elif self.levels is not None:
            raise SchemaError(
                f"continuous variable {self.name!r} must not declare levels"
            )

    @property
    def is_ordinal(self) -> bool:
        return self.kind == ORDINAL


@dataclass(frozen=True)
class Schema:
    """Ordered variable declarations plus optional label/aux column names."""

    variables: tuple[VariableSpec, ...]
    label: Optional[str] = None
    aux: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        names = [v.name for v in self.variables]
        if len(names) != len(set(names)):
            raise SchemaError("duplicate variable names in schema")
        if not names:
            raise SchemaError("schema declares no variables")
        for special in (self.label, self.aux):
            if special is not None and special in names:
                raise SchemaError(
                    f"column {special!r} cannot be both a variable and label/aux"
                )
        if self.label is not None and self.label == self.aux:
            raise SchemaError("label and aux must be distinct columns")

    @property
    def d(self) -> int:
        return len(self.variables)

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise MissingColumn(f"no variable named {name!r} in schema") from None

    def to_dict(self) -> dict:
        return {
            "variables": [
                {"name": v.name, "kind": v.kind}
                if v.levels is None
                else {"name": v.name, "kind": v.kind, "levels": int(v.levels)}
                for v in self.variables
            ],
            "label": self.label,
            "aux": self.aux,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "Schema":
        try:
            raw = obj["variables"]
        except KeyError:
            raise SchemaError("schema JSON lacks a 'variables' list") from None
        variables = tuple(
            VariableSpec(
                name=str(entry["name"]),
                kind=str(entry["kind"]),
                levels=int(entry["levels"]) if entry.get("levels") is not None else None,
            )
            for entry in raw
        )
        return cls(
            variables=variables,
            label=obj.get("label"),
            aux=obj.get("aux"),
        )

    @classmethod
    def from_json(cls, path) -> "Schema":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _parse_cell(text: str, column: str, row: int) -> float:
    text = text.strip()
    if text == "":
        raise MissingValue(f"empty cell in column {column!r}, data row {row}")
    try:
        value = float(text)
    except ValueError:
        raise NonNumericCell(
            f"cannot parse {text!r} in column {column!r}, data row {row}"
        ) from None
    if not np.isfinite(value):
        raise MissingValue(
            f"non-finite value {text!r} in column {column!r}, data row {row}"
        )
    return value


def _check_ordinal(values: np.ndarray, spec: VariableSpec) -> None:
    if not np.all(values == np.round(values)):
        bad = values[values != np.round(values)][0]
        raise OrdinalOutOfRange(
            f"ordinal column {spec.name!r} contains non-integer code {bad!r}"
        )
    lo, hi = values.min(initial=1), values.max(initial=1)
    if lo < 1 or hi > spec.levels:
        raise OrdinalOutOfRange(
            f"ordinal column {spec.name!r} has codes outside 1..{spec.levels}"
        )


def _check_labels(values: np.ndarray) -> None:
    if not np.all(np.isin(values, (0.0, 1.0))):
        bad = values[~np.isin(values, (0.0, 1.0))][0]
        raise NonNumericCell(f"label column contains {bad!r}; labels must be 0 or 1")


@dataclass
class Dataset:
    """A validated table of modeled variables with optional labels and aux.

    ``x`` has one column per schema variable, in schema order.  Ordinal
    columns hold integer codes stored as floats.
    """

    schema: Schema
    x: np.ndarray
    labels: Optional[np.ndarray] = None
    aux: Optional[np.ndarray] = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        if self.x.ndim != 2 or self.x.shape[1] != self.schema.d:
            raise SchemaError(
                f"data has shape {self.x.shape}, schema expects {self.schema.d} columns"
            )
        if not np.all(np.isfinite(self.x)):
            raise MissingValue("dataset contains non-finite values")
        for j, spec in enumerate(self.schema.variables):
            if spec.is_ordinal and self.n:
                _check_ordinal(self.x[:, j], spec)
        if self.labels is not None:
            self.labels = np.asarray(self.labels)
            if self.labels.shape != (self.n,):
                raise SchemaError("labels length does not match data")
            _check_labels(self.labels.astype(float))
            self.labels = self.labels.astype(int)
        if self.aux is not None:
            self.aux = np.asarray(self.aux, dtype=float)
            if self.aux.shape != (self.n,):
                raise SchemaError("aux length does not match data")
            if not np.all(np.isfinite(self.aux)):
                raise MissingValue("aux column contains non-finite values")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def column(self, name: str) -> np.ndarray:
        return self.x[:, self.schema.index_of(name)]

    def subset(self, idx) -> "Dataset":
        return Dataset(
            schema=self.schema,
            x=self.x[idx],
            labels=None if self.labels is None else self.labels[idx],
            aux=None if self.aux is None else self.aux[idx],
        )

    def split_by_class(self) -> dict[int, "Dataset"]:
        """Partition rows by label; empty classes are kept and warned about."""
        if self.labels is None:
            raise SchemaError("cannot split a dataset without labels")
        parts = {}
        for cls in (0, 1):
            mask = self.labels == cls
            if not np.any(mask):
                warnings.warn(f"class {cls} has no rows", stacklevel=2)
            parts[cls] = self.subset(mask)
        return parts

    def to_csv(self, path) -> None:
        """Write the table; floats use repr precision so reload is exact."""
        header = list(self.schema.names)
        if self.schema.label is not None and self.labels is not None:
            header.append(self.schema.label)
        if self.schema.aux is not None and self.aux is not None:
            header.append(self.schema.aux)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for i in range(self.n):
                row = []
                for j, spec in enumerate(self.schema.variables):
                    v = self.x[i, j]
                    row.append(str(int(v)) if spec.is_ordinal else format(v, ".17g"))
                if self.schema.label is not None and self.labels is not None:
                    row.append(str(int(self.labels[i])))
                if self.schema.aux is not None and self.aux is not None:
                    row.append(format(self.aux[i], ".17g"))
                writer.writerow(row)


def load_dataset(path, schema: Schema) -> Dataset:
    """Read a CSV with a header row and validate it against ``schema``.

    Raises
    ------
    MissingColumn, MissingValue, NonNumericCell, OrdinalOutOfRange, EmptyDataset
        On malformed input; messages identify the offending column and row.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyDataset(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        col_index = {}
        for want in schema.names + [c for c in (schema.label, schema.aux) if c]:
            if want not in header:
                raise MissingColumn(f"{path}: required column {want!r} not found")
            col_index[want] = header.index(want)
        rows = []
        for irow, rec in enumerate(reader, start=1):
            if not rec or all(cell.strip() == "" for cell in rec):
                continue
            if len(rec) != len(header):
                raise NonNumericCell(
                    f"{path}: data row {irow} has {len(rec)} cells, header has {len(header)}"
                )
            rows.append(
                [_parse_cell(rec[col_index[name]], name, irow) for name in col_index]
            )
    if not rows:
        raise EmptyDataset(f"{path}: no data rows")
    table = np.asarray(rows, dtype=float)
    names = list(col_index)
    x = table[:, [names.index(nm) for nm in schema.names]]
    labels = None
    if schema.label is not None:
        labels = table[:, names.index(schema.label)]
        _check_labels(labels)
        labels = labels.astype(int)
    aux = table[:, names.index(schema.aux)] if schema.aux is not None else None
    return Dataset(schema=schema, x=x, labels=labels, aux=aux)
