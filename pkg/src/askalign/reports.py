"""Human-readable and machine-readable result tables."""

from __future__ import annotations

from typing import Mapping, Sequence

from .stats import Ac1Result

REPRODUCIBILITY_NOTE = (
    "Published win-rates and interactive diagnostic accuracies for real "
    "model suites require the original trained checkpoints and commercial "
    "judge endpoints, and are NOT reproduced at desk scale. This toolkit "
    "validates the metric formulas, table shapes, and end-to-end pipeline "
    "execution with deterministic mock backends instead; plug in real "
    "endpoint configs to measure live systems."
)


def winrate_accuracy_table(rows: Sequence[Mapping]) -> str:
    """Two-metric summary table: one row per model variant.

    Row keys: model (str), winrate (float or None), accuracy (float or None).
    """
    if not rows:
        raise ValueError("no rows to report")
    lines = [f"{'Model':<28}{'Win-rate':>10}{'MediQ-AD':>10}"]
    for row in rows:
        winrate = row.get("winrate")
        accuracy = row.get("accuracy")
        win_cell = f"{winrate:>10.2f}" if winrate is not None else f"{'-':>10}"
        acc_cell = f"{accuracy:>10.2f}" if accuracy is not None else f"{'-':>10}"
        lines.append(f"{str(row['model']):<28}{win_cell}{acc_cell}")
    return "\n".join(lines)


def render_retention(report_dict: Mapping) -> str:
    """Retention table from a saved report dict (per-attribute E-C/E-O/O-C)."""
    headers = {"EC": "E-C", "EO": "E-O", "OC": "O-C"}
    lines = [f"{'Attribute':<22}" + "".join(f"{headers[t]:>8}"
                                            for t in ("EC", "EO", "OC"))]
    for attr, cells in sorted(report_dict["per_cell"].items()):
        row = f"{attr:<22}"
        for pt in ("EC", "EO", "OC"):
            cell = cells.get(pt)
            pct = 100.0 * cell["kept_fraction"] if cell else 0.0
            row += f"{pct:>8.1f}"
        lines.append(row)
    lines.append(f"global kept: {100.0 * report_dict['global_kept_fraction']:.1f}%")
    return "\n".join(lines)


def agreement_table(rows: Sequence[tuple[str, Ac1Result]]) -> str:
    """AC1 table with the CI, p-value, PA and PE columns."""
    lines = [f"{'Variant':<20}{'AC1':>8}{'CI Lower':>10}{'CI Upper':>10}"
             f"{'p-value':>10}{'PA':>8}{'PE':>8}"]
    for label, r in rows:
        lines.append(f"{label:<20}{r.ac1:>8.3f}{r.ci_low:>10.3f}"
                     f"{r.ci_high:>10.3f}{r.p_value:>10.3g}"
                     f"{r.pa:>8.3f}{r.pe:>8.3f}")
    return "\n".join(lines)
