"""Shared CSV/JSON artifact schemas and validation.

Every emitter writes through :func:`write_csv` and every consumer reads
through :func:`read_csv`, both of which validate against the named schema.
CSV files carry a header row, UTF-8, LF endings; floats use the shortest
round-trip decimal form, so write -> read -> write is byte-identical.
"""

import csv
import json
import math
from pathlib import Path
from typing import Iterable, List, Sequence

__all__ = [
    "SCHEMAS",
    "MANIFEST_KEYS",
    "SchemaError",
    "validate",
    "validate_rows",
    "write_csv",
    "read_csv",
    "write_manifest",
    "validate_manifest",
]

SCHEMA_VERSION = 1

# column name -> type code: f float (finite), g float (nan allowed),
# i integer, s string
SCHEMAS = {
    "dispersion": [
        ("kx", "f"), ("ky", "f"), ("eps", "f"), ("re_omega", "f"),
        ("im_omega", "f"), ("eps_tilde", "f"), ("re_xi", "f"), ("im_xi", "f"),
    ],
    "nk_t": [
        ("t", "f"), ("kx", "f"), ("ky", "f"), ("layer", "s"),
        ("value", "f"), ("stderr", "f"),
    ],
    "npair_t": [("t", "f"), ("value", "f"), ("stderr", "f")],
    "cpm_t": [
        ("t", "f"), ("dx", "i"), ("dy", "i"), ("layer", "s"),
        ("re", "f"), ("im", "f"),
    ],
    "nk_avg": [("kx", "f"), ("ky", "f"), ("mean", "f"), ("stderr", "f")],
    "summary": [("param", "f"), ("gamma", "f"), ("k_star", "s"), ("topology", "s")],
}

MANIFEST_KEYS = [
    "schema_version", "solver", "config", "seed", "threads",
    "wall_time_s", "created_utc", "git_describe", "artifacts",
]


class SchemaError(ValueError):
    """Artifact failed schema validation."""


def _format(value, kind: str) -> str:
    if kind == "s":
        return str(value)
    if kind == "i":
        return str(int(value))
    return repr(float(value))


def _parse(text: str, kind: str):
    if kind == "s":
        return text
    if kind == "i":
        return int(text)
    return float(text)


def validate_rows(rows: Iterable[Sequence], schema_id: str) -> List[str]:
    """Exhaustive list of violations for an in-memory record stream."""
    columns = SCHEMAS[schema_id]
    violations = []
    for ln, row in enumerate(rows):
        if len(row) != len(columns):
            violations.append(f"row {ln}: expected {len(columns)} fields, got {len(row)}")
            continue
        for (name, kind), value in zip(columns, row):
            if kind == "s":
                continue
            try:
                v = float(value)
            except (TypeError, ValueError):
                violations.append(f"row {ln}: column {name!r} not numeric: {value!r}")
                continue
            if kind == "i" and v != int(v):
                violations.append(f"row {ln}: column {name!r} not an integer: {value!r}")
            if kind == "f" and not math.isfinite(v):
                violations.append(f"row {ln}: column {name!r} not finite: {value!r}")
    return violations


def validate(path, schema_id: str) -> List[str]:
    """Validate a CSV file on disk; returns [] when well-formed."""
    if schema_id not in SCHEMAS:
        raise KeyError(f"unknown schema {schema_id!r}")
    path = Path(path)
    columns = SCHEMAS[schema_id]
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                return ["empty file: missing header"]
            violations = []
            expected = [name for name, _ in columns]
            if header != expected:
                missing = [c for c in expected if c not in header]
                extra = [c for c in header if c not in expected]
                for c in missing:
                    violations.append(f"missing column {c!r}")
                for c in extra:
                    violations.append(f"unexpected column {c!r}")
                if not missing and not extra:
                    violations.append(f"column order {header} != {expected}")
                return violations
            violations.extend(validate_rows(reader, schema_id))
            return violations
    except OSError as exc:
        raise SchemaError(f"unreadable input {path}: {exc}") from exc


def write_csv(path, schema_id: str, rows: Iterable[Sequence]) -> None:
    """Write rows after validating them against the schema."""
    columns = SCHEMAS[schema_id]
    rows = [list(r) for r in rows]
    violations = validate_rows(rows, schema_id)
    if violations:
        raise SchemaError(f"refusing to write invalid {schema_id}: {violations[:5]}")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([name for name, _ in columns])
        for row in rows:
            writer.writerow([_format(v, kind) for (name, kind), v in zip(columns, row)])


def read_csv(path, schema_id: str) -> List[dict]:
    """Read and validate, returning one dict per row with parsed values."""
    violations = validate(path, schema_id)
    if violations:
        raise SchemaError(f"invalid {schema_id} at {path}: {violations[:5]}")
    columns = SCHEMAS[schema_id]
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            out.append({name: _parse(v, kind) for (name, kind), v in zip(columns, row)})
    return out


def write_manifest(path, manifest: dict) -> None:
    missing = [k for k in MANIFEST_KEYS if k not in manifest]
    if missing:
        raise SchemaError(f"manifest missing keys: {missing}")
    manifest = dict(manifest, schema_version=SCHEMA_VERSION)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def validate_manifest(path) -> List[str]:
    try:
        with open(path, encoding="utf-8") as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        return [f"unreadable manifest: {exc}"]
    return [f"missing key {k!r}" for k in MANIFEST_KEYS if k not in manifest]
