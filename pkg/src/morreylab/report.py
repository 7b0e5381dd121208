"""Experiment reports: JSON structure, schema and CSV export."""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field
from typing import Any

KINDS = ("exact", "lower", "upper", "approx")
_KIND_ALIASES = {"lower_bound": "lower", "approximation": "approx"}

REPORT_SCHEMA: dict = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "morreylab experiment report",
    "type": "object",
    "required": ["experiment", "inputs", "records", "tolerances", "status"],
    "properties": {
        "experiment": {"type": "string"},
        "inputs": {"type": "object"},
        "tolerances": {"type": "object"},
        "status": {"enum": ["ok", "PASS", "FAIL", "certified", "failed", "inconclusive", "unbounded"]},
        "duration_s": {"type": "number", "minimum": 0},
        "records": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "value", "kind", "op"],
                "properties": {
                    "name": {"type": "string"},
                    "value": {"anyOf": [{"type": "number"}, {"const": "inf"}, {"type": "null"}]},
                    "kind": {"enum": list(KINDS)},
                    "op": {"type": "string"},
                    "status": {"enum": ["PASS", "FAIL"]},
                    "threshold": {},
                    "witness": {},
                    "note": {"type": "string"},
                },
            },
        },
    },
}


def _clean(value: Any) -> Any:
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if math.isnan(value):
            return None
        return value
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if hasattr(value, "item") and not isinstance(value, (str, bytes)):
        return _clean(value.item())
    return value


@dataclass
class ExperimentReport:
    experiment: str
    inputs: dict = field(default_factory=dict)
    records: list = field(default_factory=list)
    tolerances: dict = field(default_factory=dict)
    status: str = "ok"
    _started: float = field(default_factory=time.perf_counter, repr=False)
    duration_s: float | None = None

    def add(self, name: str, value, kind: str, op: str, **extra) -> dict:
        kind = _KIND_ALIASES.get(kind, kind)
        if kind not in KINDS:
            raise ValueError(f"unknown record kind {kind!r}")
        rec = {"name": name, "value": _clean(float(value)) if value is not None else None,
               "kind": kind, "op": op}
        rec.update({k: _clean(v) for k, v in extra.items() if v is not None})
        self.records.append(rec)
        return rec

    def check(self, name: str, value, passed: bool, kind: str, op: str, threshold=None, **extra) -> bool:
        self.add(name, value, kind, op, status="PASS" if passed else "FAIL", threshold=threshold, **extra)
        return passed

    @property
    def failures(self) -> list:
        return [r for r in self.records if r.get("status") == "FAIL"]

    def finish(self) -> "ExperimentReport":
        self.duration_s = time.perf_counter() - self._started
        return self

    def to_json(self, timing: bool = True) -> dict:
        out = {
            "experiment": self.experiment,
            "inputs": _clean(self.inputs),
            "records": self.records,
            "tolerances": _clean(self.tolerances),
            "status": self.status,
        }
        if timing and self.duration_s is not None:
            out["duration_s"] = self.duration_s
        return out

    def dumps(self, timing: bool = True) -> str:
        return json.dumps(self.to_json(timing), indent=2, sort_keys=True)

    def write_csv(self, path) -> None:
        cols = ["experiment", "name", "value", "kind", "op", "status", "threshold"]
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore")
            w.writeheader()
            for rec in self.records:
                w.writerow({"experiment": self.experiment, **rec})


def validate_report(obj: dict) -> None:
    """Raise jsonschema.ValidationError when ``obj`` does not match REPORT_SCHEMA."""
    import jsonschema

    jsonschema.validate(obj, REPORT_SCHEMA)
