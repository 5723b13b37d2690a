# ADC-IMPLEMENTS: <metaspline-output-feature-01>
import csv
import io
from pathlib import Path
from typing import Any, Iterable, List, Mapping, Optional, Sequence, Union

from .algorithms.energy import EnergyBreakdown
from .algorithms.optimize import IterationRecord

# Breakdown term -> CSV column
TERM_COLUMNS = {
    "elastic_reg": "E_WD",
    "accel_reg": "E_WA",
    "slack_transport": "E_Ds",
    "intensity_misfit": "E_Dg",
    "slack_norm": "E_znorm",
}
ENERGY_COLUMNS = ["k", "E_WD", "E_WA", "E_Ds", "E_Dg", "E_znorm", "E_total"]
ITERATION_COLUMNS = [
    "iter",
    "level",
    "E_total",
    "E_WD",
    "E_WA",
    "E_Ds",
    "E_Dg",
    "E_znorm",
    "min_det",
    "L_phi",
    "L_z",
    "L_u",
]


def format_float(value: Optional[float]) -> str:
    """Fixed-width scientific notation; inactive terms become empty cells."""
    if value is None:
        return ""
    return f"{value:.12e}"


# ADC-IMPLEMENTS: <metaspline-output-feature-01>
class OutputFormatter:
    """Deterministic CSV and text renderings of solver results."""

    @staticmethod
    def format_header(parameters: Mapping[str, Any]) -> str:
        """``# key=value`` comment lines echoing the run parameters, sorted by key."""
        return "".join(f"# {key}={parameters[key]}\n" for key in sorted(parameters))

    @staticmethod
    def _table(columns: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(columns)
        writer.writerows(rows)
        return buffer.getvalue()

    @staticmethod
    def format_energy_csv(
        breakdown: EnergyBreakdown, parameters: Optional[Mapping[str, Any]] = None
    ) -> str:
        """One row per k, one column per term, and a final total row."""
        rows = []
        for k in range(1, breakdown.K + 1):
            row = breakdown.row(k)
            values = [row[name] for name in _column_order()]
            row_total = sum(value for value in values if value is not None)
            rows.append([str(k)] + [format_float(v) for v in values] + [format_float(row_total)])

        sums = breakdown.term_sums()
        rows.append(
            ["total"]
            + [
                format_float(sums[name]) if any(v is not None for v in breakdown.term(name)) else ""
                for name in _column_order()
            ]
            + [format_float(breakdown.total)]
        )
        header = OutputFormatter.format_header(parameters or {})
        return header + OutputFormatter._table(ENERGY_COLUMNS, rows)

    @staticmethod
    def format_iteration_csv(
        records: Sequence[IterationRecord], parameters: Optional[Mapping[str, Any]] = None
    ) -> str:
        rows = []
        for record in records:
            rows.append(
                [str(record.iteration), str(record.level), format_float(record.total)]
                + [format_float(record.terms[name]) for name in _column_order()]
                + [
                    format_float(record.min_det),
                    format_float(record.lipschitz_deformation),
                    format_float(record.lipschitz_slack),
                    format_float(record.lipschitz_image),
                ]
            )
        header = OutputFormatter.format_header(parameters or {})
        return header + OutputFormatter._table(ITERATION_COLUMNS, rows)

    @staticmethod
    def format_table_csv(
        rows: Sequence[Mapping[str, Any]], parameters: Optional[Mapping[str, Any]] = None
    ) -> str:
        """Generic metrics table; columns follow the key order of the first row."""
        header = OutputFormatter.format_header(parameters or {})
        if not rows:
            return header
        columns = list(rows[0].keys())
        body = [
            [
                format_float(row[column]) if isinstance(row[column], float) else str(row[column])
                for column in columns
            ]
            for row in rows
        ]
        return header + OutputFormatter._table(columns, body)

    @staticmethod
    def format_summary(breakdown: EnergyBreakdown) -> str:
        """Human-readable energy summary for the terminal."""
        lines = ["=" * 60, "ENERGY BREAKDOWN", "=" * 60]
        for name, value in breakdown.term_sums().items():
            lines.append(f"{TERM_COLUMNS[name]:<10} {value:.6e}")
        lines.append(f"{'E_total':<10} {breakdown.total:.6e}")
        lines.append("=" * 60)
        return "\n".join(lines)


def _column_order() -> List[str]:
    """Breakdown term names in CSV column order."""
    by_column = {column: name for name, column in TERM_COLUMNS.items()}
    return [by_column[column] for column in ENERGY_COLUMNS[1:-1]]


def write_text(path: Union[str, Path], text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path

