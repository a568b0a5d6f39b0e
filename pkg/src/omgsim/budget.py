"""Error-budget ledger: tagged error mechanisms and their additive totals.

Budgets collect independently characterized error mechanisms (each a percent
with an optional 1-sigma uncertainty and a measured/calculated provenance
tag) and reproduce the printed subtotal and total rows of the readout and
mid-circuit-operation budget tables by plain summation, with uncertainties
combined in quadrature.  The bundled datasets carry the printed values
alongside, so regressions can flag any row whose printed total drifts from
the sum of its entries by more than rounding.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import NamedTuple

from .errors import DomainError, EmptyCategoryError, MissingExposureError

__all__ = [
    "ErrorEntry",
    "ErrorBudget",
    "MechanismModel",
    "Total",
    "ComparisonReport",
    "RowCheck",
    "total",
    "compare",
    "mechanism_error",
    "entries_from_csv",
    "entries_to_csv",
    "bundled_table",
    "bundled_case",
    "check_bundled_table",
    "render_text_table",
    "BUNDLED_TABLES",
]

CATEGORIES = ("SPAM", "procedure", "loss", "residual_m", "detection")
PROVENANCE = ("m", "c", "mc")

# Printed totals further than this (in absolute percent) from the sum of
# their entries are flagged as genuine discrepancies rather than rounding.
ROUNDING_SLACK = 0.10

BUNDLED_TABLES = ("a1", "a2")


@dataclass(frozen=True)
class ErrorEntry:
    """One tagged error mechanism, in percent."""

    name: str
    value: float
    sigma: float | None = None
    provenance: str = "m"
    category: str = "procedure"
    role: str = ""

    def __post_init__(self):
        if self.value < 0:
            raise DomainError(f"error value must be >= 0, got {self.value}")
        if self.sigma is not None and self.sigma < 0:
            raise DomainError("sigma must be >= 0")
        if self.provenance not in PROVENANCE:
            raise DomainError(f"provenance must be one of {PROVENANCE}")
        if self.category not in CATEGORIES:
            raise DomainError(f"category must be one of {CATEGORIES}")


@dataclass(frozen=True)
class ErrorBudget:
    """A ledger of error entries with the measured quantity they explain.

    measured_value is the printed success percentage (contrast, detection
    fidelity or reset probability); the corresponding measured error is
    100 - measured_value.
    """

    entries: tuple[ErrorEntry, ...]
    label: str = ""
    measured_value: float | None = None
    measured_sigma: float | None = None

    def __post_init__(self):
        entries = tuple(self.entries)
        if not entries:
            raise DomainError("budget must contain at least one entry")
        object.__setattr__(self, "entries", entries)

    def categories(self) -> tuple[str, ...]:
        seen = []
        for e in self.entries:
            if e.category not in seen:
                seen.append(e.category)
        return tuple(seen)


class Total(NamedTuple):
    value: float
    sigma: float


def total(budget: ErrorBudget, category: str | None = None) -> Total:
    """Sum of entry values, with sigmas combined in quadrature.

    Entries without a printed sigma contribute zero to the quadrature.
    Raises EmptyCategoryError when the filter leaves nothing.
    """
    selected = [
        e for e in budget.entries if category is None or e.category == category
    ]
    if not selected:
        raise EmptyCategoryError(f"no entries in category {category!r}")
    value = sum(e.value for e in selected)
    sigma = math.sqrt(sum((e.sigma or 0.0) ** 2 for e in selected))
    return Total(value, sigma)


class ComparisonReport(NamedTuple):
    measured_error: float
    measured_sigma: float
    estimate: float
    estimate_sigma: float
    discrepancy_sigma: float


def compare(budget: ErrorBudget) -> ComparisonReport:
    """Measured error versus the summed estimate, in combined-sigma units."""
    if budget.measured_value is None:
        raise DomainError("budget carries no measured value to compare against")
    measured_error = 100.0 - budget.measured_value
    measured_sigma = budget.measured_sigma or 0.0
    est = total(budget)
    denom = math.hypot(measured_sigma, est.sigma)
    disc = (measured_error - est.value) / denom if denom > 0 else math.inf
    if measured_error == est.value:
        disc = 0.0
    return ComparisonReport(measured_error, measured_sigma, est.value, est.sigma, disc)


@dataclass(frozen=True)
class MechanismModel:
    """Parametric model for how an error mechanism accumulates.

    kind 'exp_decay': 1 - exp(-rate * duration), with `rate` in 1/s.
    kind 'linear_in_depth': rate = alpha * trap_depth first, then exp_decay.
    kind 'constant': a fixed percentage independent of exposure.
    """

    kind: str
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("exp_decay", "linear_in_depth", "constant"):
            raise DomainError(f"unknown mechanism kind {self.kind!r}")
        for key, v in self.parameters.items():
            if key in ("rate", "alpha", "value") and v < 0:
                raise DomainError(f"{key} must be >= 0")


def mechanism_error(model: MechanismModel, exposure: dict | None = None) -> float:
    """Evaluate a mechanism model for the given exposure, in percent."""
    exposure = exposure or {}

    def need(key):
        if key not in exposure:
            raise MissingExposureError(key)
        return exposure[key]

    if model.kind == "constant":
        return float(model.parameters["value"])
    if model.kind == "linear_in_depth":
        rate = model.parameters["alpha"] * need("trap_depth")
    else:
        rate = model.parameters["rate"]
    duration = need("duration")
    return 100.0 * (1.0 - math.exp(-rate * duration))


# ---------------------------------------------------------------------------
# CSV interchange
# ---------------------------------------------------------------------------

def entries_from_csv(text: str) -> tuple[ErrorEntry, ...]:
    """Parse entries from CSV columns name,value_pct,sigma_pct,provenance,category,role."""
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        sigma = row.get("sigma_pct", "").strip()
        out.append(
            ErrorEntry(
                name=row["name"].strip(),
                value=float(row["value_pct"]),
                sigma=float(sigma) if sigma else None,
                provenance=row["provenance"].strip(),
                category=row["category"].strip(),
                role=row.get("role", "").strip(),
            )
        )
    return tuple(out)


def entries_to_csv(entries) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["name", "value_pct", "sigma_pct", "provenance", "category", "role"])
    for e in entries:
        writer.writerow(
            [e.name, repr(e.value), "" if e.sigma is None else repr(e.sigma), e.provenance, e.category, e.role]
        )
    return out.getvalue()


# ---------------------------------------------------------------------------
# Bundled regression tables
# ---------------------------------------------------------------------------

def _data_dir():
    return resources.files("omgsim") / "data" / "budgets"


def _load_index(table: str) -> dict:
    if table not in BUNDLED_TABLES:
        raise DomainError(f"unknown bundled table {table!r}; have {BUNDLED_TABLES}")
    return json.loads(_data_dir().joinpath(f"{table}.json").read_text())


def bundled_case(table: str, case: str) -> tuple[ErrorBudget, dict]:
    """One bundled budget and its printed subtotal rows.

    Returns (budget, printed) where printed maps a category name (or
    'total') to [value, sigma-or-None] as it appears in the source table.
    """
    index = _load_index(table)
    if case not in index:
        raise DomainError(f"unknown case {case!r}; have {sorted(index)}")
    meta = index[case]
    entries = entries_from_csv(_data_dir().joinpath(f"{table}-{case}.csv").read_text())
    budget = ErrorBudget(
        entries=entries,
        label=meta.get("label", case),
        measured_value=meta.get("measured_pct"),
        measured_sigma=meta.get("measured_sigma_pct"),
    )
    return budget, meta["printed"]


def bundled_table(table: str) -> dict:
    """All cases of a bundled table: {case: (budget, printed rows)}."""
    return {case: bundled_case(table, case) for case in _load_index(table)}


class RowCheck(NamedTuple):
    case: str
    row: str
    computed: float
    computed_sigma: float
    printed: float
    printed_sigma: float | None
    flagged: bool


def check_bundled_table(table: str) -> list[RowCheck]:
    """Recompute every printed subtotal/total row of a bundled table.

    A row is flagged when the printed value sits more than ROUNDING_SLACK
    absolute percent away from the sum of its entries, which marks a genuine
    inconsistency in the source rather than rounding.
    """
    checks = []
    for case, (budget, printed) in bundled_table(table).items():
        for row_name, (printed_value, printed_sigma) in printed.items():
            if row_name == "total":
                t = total(budget)
            else:
                t = total(budget, row_name)
            checks.append(
                RowCheck(
                    case=case,
                    row=row_name,
                    computed=t.value,
                    computed_sigma=t.sigma,
                    printed=printed_value,
                    printed_sigma=printed_sigma,
                    flagged=abs(t.value - printed_value) > ROUNDING_SLACK,
                )
            )
    return checks


def render_text_table(budget: ErrorBudget, printed: dict | None = None) -> str:
    """Fixed-width listing of a budget with its category subtotals."""
    lines = [f"{budget.label or 'error budget'}"]
    if budget.measured_value is not None:
        sig = f" +- {budget.measured_sigma:g}" if budget.measured_sigma else ""
        lines.append(f"{'measured':<42}{budget.measured_value:>8.2f}{sig}")
    lines.append(f"{'entry':<34}{'%':>8}  {'sigma':>6}  prov")
    lines.append("-" * 60)
    for cat in budget.categories():
        for e in budget.entries:
            if e.category != cat:
                continue
            sigma = f"{e.sigma:g}" if e.sigma is not None else "-"
            lines.append(f"  {e.name:<32}{e.value:>8.3g}  {sigma:>6}  {e.provenance}")
        t = total(budget, cat)
        lines.append(f"{cat + ' subtotal':<34}{t.value:>8.3f}  {t.sigma:>6.3f}")
        if printed and cat in printed:
            pv, ps = printed[cat]
            mark = "  <- printed value differs" if abs(t.value - pv) > ROUNDING_SLACK else ""
            lines.append(f"{'  printed':<34}{pv:>8.3f}{mark}")
    t = total(budget)
    lines.append("-" * 60)
    lines.append(f"{'total estimate':<34}{t.value:>8.3f}  {t.sigma:>6.3f}")
    if printed and "total" in printed:
        pv, ps = printed["total"]
        mark = "  <- printed value differs" if abs(t.value - pv) > ROUNDING_SLACK else ""
        lines.append(f"{'  printed':<34}{pv:>8.3f}{mark}")
    return "\n".join(lines) + "\n"
