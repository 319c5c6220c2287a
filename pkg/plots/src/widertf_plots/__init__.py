"""Render widertf harness CSV output into sweep figures.

The only coupling to the estimation package is the documented CSV schema:
one row per (scenario, swept_parameter, value, method, metric) with the
trial mean, a 95% confidence interval and bookkeeping columns. Each
(scenario, swept parameter, metric) combination becomes one panel: methods
are drawn as solid lines with faded confidence bands, bound curves
(method names starting with ``crb-``) as dashed/dotted lines, and
Hermitian-angle panels never show bound curves.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

__all__ = ["CSV_COLUMNS", "Panel", "SchemaError", "read_rows", "render_csv"]

CSV_COLUMNS = [
    "scenario", "swept_parameter", "value", "method", "metric",
    "mean", "ci_lo", "ci_hi", "n_trials", "seed",
]

_AXIS_LABELS = {
    "rmse_db": "RMSE [dB]",
    "hermitian_angle_rad": "Hermitian angle [rad]",
}

_PARAM_LABELS = {
    "rho_f": "target correlation",
    "upsilon_f": "noise correlation",
    "L": "frames L",
    "snr_db": "SNR [dB]",
}

_BOUND_PREFIX = "crb-"
_BOUND_STYLES = ["--", ":", "-."]


class SchemaError(ValueError):
    """CSV header or row does not match the harness schema."""


@dataclass
class Panel:
    """One rendered figure plus what was drawn on it."""

    scenario: str
    swept_parameter: str
    metric: str
    path: Path
    labels: list[str] = field(default_factory=list)  # legend order
    n_ci_bands: int = 0


def read_rows(csv_path):
    """Parse and validate a harness CSV; returns a list of row dicts."""
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{csv_path}: empty file, expected header "
                              f"{CSV_COLUMNS}") from None
        if header != CSV_COLUMNS:
            missing = [c for c in CSV_COLUMNS if c not in header]
            extra = [c for c in header if c not in CSV_COLUMNS]
            raise SchemaError(
                f"{csv_path}: header mismatch; missing columns {missing}, "
                f"unexpected columns {extra}, expected order {CSV_COLUMNS}")
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != len(CSV_COLUMNS):
                raise SchemaError(f"{csv_path}:{lineno}: expected "
                                  f"{len(CSV_COLUMNS)} fields, got {len(rec)}")
            row = dict(zip(CSV_COLUMNS, rec))
            try:
                for col in ("value", "mean", "ci_lo", "ci_hi"):
                    row[col] = float(row[col])
                row["n_trials"] = int(row["n_trials"])
            except ValueError as exc:
                raise SchemaError(f"{csv_path}:{lineno}: {exc}") from None
            rows.append(row)
    if not rows:
        raise SchemaError(f"{csv_path}: no data rows")
    return rows


def _series(rows):
    """Sorted (values, means, ci_los, ci_his) for one method's rows."""
    rows = sorted(rows, key=lambda r: r["value"])
    return ([r["value"] for r in rows], [r["mean"] for r in rows],
            [r["ci_lo"] for r in rows], [r["ci_hi"] for r in rows])


def render_csv(csv_path, out_dir, dpi=120):
    """Render one PNG per (scenario, swept parameter, metric) panel.

    Returns {file stem: Panel}.
    """
    rows = read_rows(csv_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    groups = {}
    for row in rows:
        key = (row["scenario"], row["swept_parameter"], row["metric"])
        groups.setdefault(key, {}).setdefault(row["method"], []).append(row)

    panels = {}
    for (scenario, param, metric), methods in sorted(groups.items()):
        stem = f"{scenario}-{param}-{metric}"
        panel = Panel(scenario=scenario, swept_parameter=param, metric=metric,
                      path=out_dir / f"{stem}.png")
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        bound_style = iter(_BOUND_STYLES)
        for method in sorted(methods):
            values, means, los, his = _series(methods[method])
            if method.startswith(_BOUND_PREFIX):
                if metric != "rmse_db":
                    continue  # bounds are not meaningful on angle panels
                ax.plot(values, means, next(bound_style, ":"), color="black",
                        label=method)
            else:
                (line,) = ax.plot(values, means, "-", marker="o", label=method)
                if any(hi > lo for lo, hi in zip(los, his)):
                    ax.fill_between(values, los, his, alpha=0.2,
                                    color=line.get_color(), linewidth=0)
                    panel.n_ci_bands += 1
            panel.labels.append(method)
        ax.set_xlabel(_PARAM_LABELS.get(param, param))
        ax.set_ylabel(_AXIS_LABELS.get(metric, metric))
        ax.set_title(f"{scenario}: {metric} vs {param}")
        ax.grid(True, alpha=0.3)
        ax.legend()
        fig.tight_layout()
        # Empty metadata keeps the PNG byte-identical across runs.
        fig.savefig(panel.path, dpi=dpi, metadata={"Software": None})
        plt.close(fig)
        panels[stem] = panel
    return panels
