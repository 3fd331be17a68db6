"""CountsTable JSON wire format.

Top level: {"version": "weakreal/1", "meta": {...}, "runs": [...]}.
Bitstrings are a, b, c left to right; c-bit 0 means the condition is met.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .constants import FORMAT_VERSION

BIT3 = "^[01]{3}$"

COUNTS_SCHEMA = {
    "type": "object",
    "required": ["version", "meta", "runs"],
    "additionalProperties": False,
    "properties": {
        "version": {"const": FORMAT_VERSION},
        "meta": {
            "type": "object",
            "required": ["psi", "theta", "order", "shots", "source"],
            "additionalProperties": False,
            "properties": {
                "psi": {"type": "number"},
                "theta": {"type": "number"},
                "order": {"enum": ["AB", "BA"]},
                "shots": {"type": "integer", "minimum": 1},
                "source": {"type": "string"},
                "seed": {"type": ["integer", "null"]},
                "job": {"type": "integer", "minimum": 0},
            },
        },
        "runs": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["sign_a", "sign_b", "counts"],
                "additionalProperties": False,
                "properties": {
                    "sign_a": {"enum": [1, -1]},
                    "sign_b": {"enum": [1, -1]},
                    "repetition": {"type": "integer", "minimum": 0},
                    "counts": {
                        "type": "object",
                        "propertyNames": {"pattern": BIT3},
                        "additionalProperties": {"type": "integer", "minimum": 0},
                    },
                },
            },
        },
    },
}


class SchemaError(ValueError):
    """Counts file violates the wire format; ``where`` locates the problem."""

    def __init__(self, message: str, where: str = ""):
        super().__init__(f"{where}: {message}" if where else message)
        self.where = where


@dataclass(frozen=True)
class Run:
    sign_a: int
    sign_b: int
    counts: dict
    repetition: int | None = None

    @property
    def total(self) -> int:
        return sum(self.counts.values())


@dataclass(frozen=True)
class CountsTable:
    psi: float
    theta: float
    order: str
    shots: int
    runs: tuple = field(default=())
    source: str = "simulated"
    seed: int | None = None
    job: int | None = None

    def __post_init__(self):
        for i, r in enumerate(self.runs):
            if r.total != self.shots:
                raise SchemaError(f"counts sum to {r.total}, expected shots={self.shots}", f"runs[{i}].counts")

    def to_dict(self) -> dict:
        meta = {"psi": self.psi, "theta": self.theta, "order": self.order, "shots": self.shots, "source": self.source}
        if self.seed is not None:
            meta["seed"] = self.seed
        if self.job is not None:
            meta["job"] = self.job
        runs = []
        for r in self.runs:
            d = {"sign_a": r.sign_a, "sign_b": r.sign_b}
            if r.repetition is not None:
                d["repetition"] = r.repetition
            d["counts"] = {k: int(r.counts[k]) for k in sorted(r.counts)}
            runs.append(d)
        return {"version": FORMAT_VERSION, "meta": meta, "runs": runs}

    @classmethod
    def from_dict(cls, d: dict) -> "CountsTable":
        validate(d)
        m = d["meta"]
        runs = tuple(Run(r["sign_a"], r["sign_b"], dict(r["counts"]), r.get("repetition")) for r in d["runs"])
        return cls(float(m["psi"]), float(m["theta"]), m["order"], int(m["shots"]), runs, m["source"], m.get("seed"), m.get("job"))


def _path(error: jsonschema.ValidationError) -> str:
    out = ""
    for p in error.absolute_path:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<root>"


def validate(d) -> None:
    errors = sorted(jsonschema.Draft202012Validator(COUNTS_SCHEMA).iter_errors(d), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        e = errors[0]
        raise SchemaError(e.message, _path(e))


def dumps(table: CountsTable) -> str:
    return json.dumps(table.to_dict(), indent=2) + "\n"


def loads(text: str, name: str = "<string>") -> CountsTable:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(exc.msg, f"{name}:line {exc.lineno} col {exc.colno}") from None
    try:
        return CountsTable.from_dict(d)
    except SchemaError as exc:
        raise SchemaError(str(exc), name) from None


def write(table: CountsTable, path) -> None:
    Path(path).write_text(dumps(table))


def read(path) -> CountsTable:
    return loads(Path(path).read_text(), str(path))
