"""Candidate tables and their CSV form.

Floats are written with 9 significant digits; missing values are ``nan``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import astuple, dataclass, field, fields
from pathlib import Path

NAN = float("nan")

CANDIDATE_COLUMNS = (
    "scale",
    "weight",
    "fan_speed_rpm",
    "current_a",
    "delta_fan_rpm",
    "delta_squared_current_a2",
    "max_temperature_k",
    "ess_power_kw",
    "cost_grid",
    "cost_ess",
    "total_cost",
    "feasible",
    "note",
)
COST_COLUMNS = ("weight", "total_cost", "cost_grid", "cost_ess", "feasible")


@dataclass(frozen=True)
class CandidateRow:
    scale: float
    weight: float
    fan_speed: float
    current: float
    delta_fan: float
    delta_squared_current: float
    max_temperature: float
    ess_power: float
    cost_grid: float
    cost_ess: float
    total_cost: float
    feasible: bool
    note: str = ""


@dataclass(frozen=True, eq=False)
class RunReport:
    kind: str
    rows: tuple[CandidateRow, ...]
    best: CandidateRow | None
    elapsed: float = field(default=0.0, compare=False)

    @property
    def feasible_rows(self) -> list[CandidateRow]:
        return [r for r in self.rows if r.feasible]

    def select(self, scale: float | None = None, weight: float | None = None) -> list[CandidateRow]:
        out = []
        for r in self.rows:
            if scale is not None and not math.isclose(r.scale, scale, rel_tol=0, abs_tol=1e-9):
                continue
            if weight is not None and not math.isclose(r.weight, weight, rel_tol=0, abs_tol=1e-9):
                continue
            out.append(r)
        return out


def best_row(rows) -> CandidateRow | None:
    """Feasible row of minimum total cost; the earliest row wins ties."""
    best = None
    for r in rows:
        if r.feasible and (best is None or r.total_cost < best.total_cost):
            best = r
    return best


def cost_spread(rows) -> float:
    """(max - min) / mean of total cost over the feasible rows."""
    costs = [r.total_cost for r in rows if r.feasible]
    if not costs:
        return NAN
    mean = sum(costs) / len(costs)
    return (max(costs) - min(costs)) / abs(mean) if mean else NAN


def fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return f"{value + 0.0:.9g}"  # + 0.0 folds -0.0 into 0.0
    return str(value)


def write_candidates(rows, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CANDIDATE_COLUMNS)
        for r in rows:
            w.writerow([fmt(v) for v in astuple(r)])
    return path


def write_costs(rows, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COST_COLUMNS)
        for r in rows:
            w.writerow([fmt(r.weight), fmt(r.total_cost), fmt(r.cost_grid), fmt(r.cost_ess), fmt(r.feasible)])
    return path


def read_table(path) -> list[dict]:
    """Read any CSV this package writes; numeric cells become floats."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for row in rows:
        parsed = {}
        for key, value in row.items():
            try:
                parsed[key] = float(value)
            except ValueError:
                parsed[key] = value
        out.append(parsed)
    return out


def read_candidates(path) -> list[CandidateRow]:
    kinds = {f.name: f.type for f in fields(CandidateRow)}
    out = []
    for row in read_table(path):
        values = [row[c] for c in CANDIDATE_COLUMNS]
        kw = dict(zip(kinds, values))
        kw["feasible"] = bool(kw["feasible"])
        kw["note"] = "" if kw["note"] in ("", None) else str(kw["note"])
        out.append(CandidateRow(**kw))
    return out
