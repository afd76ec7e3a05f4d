"""
CSV and JSON emission of run records with a provenance header.
"""
import csv
import io
import sys
from pathlib import Path
from typing import Any, List, Optional

from app.core.config import settings
from app.schemas.run import SAMPLE_COLUMNS, SWEEP_COLUMNS, RunRecord


class ReportService:
    @staticmethod
    def provenance_lines(record: RunRecord) -> List[str]:
        """
        ``#``-prefixed header: a tool line, then the config echo as
        ``key=value`` lines. Stripping ``# `` from all but the first line gives a
        loadable config file.
        """
        lines = [f"# {settings.APP_NAME} {record.version}"]
        lines.extend(f"# {key}={value}" for key, value in record.config.items())
        return lines

    @staticmethod
    def generate_csv_buffer(data: List[dict], headers: List[str], preamble: Optional[List[str]] = None) -> io.StringIO:
        """
        Generate CSV buffer from data.
        """
        output = io.StringIO()
        for line in preamble or []:
            output.write(line + "\n")
        writer = csv.DictWriter(output, fieldnames=headers, extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        for row in data:
            writer.writerow(row)
        output.seek(0)
        return output

    @staticmethod
    def table_of(record: RunRecord) -> tuple[List[dict], List[str]]:
        if record.rows:
            return [r.model_dump() for r in record.rows], SAMPLE_COLUMNS
        if record.sweep:
            return [r.model_dump() for r in record.sweep], SWEEP_COLUMNS
        table = record.extras.get("table")
        if table:
            return table["rows"], table["columns"]
        return [], []

    @staticmethod
    def render(record: RunRecord, fmt: str) -> str:
        if fmt == "json":
            return record.model_dump_json(indent=2) + "\n"
        rows, headers = ReportService.table_of(record)
        return ReportService.generate_csv_buffer(rows, headers, ReportService.provenance_lines(record)).getvalue()

    @staticmethod
    def write(record: RunRecord, fmt: str, out: Optional[Path] = None) -> None:
        text = ReportService.render(record, fmt)
        if out is None:
            sys.stdout.write(text)
            return
        out.write_text(text, encoding="utf-8")

    @staticmethod
    def config_from_csv(path: Path) -> dict[str, Any]:
        """Recover the echoed config keys from a CSV header."""
        values = {}
        with path.open(encoding="utf-8") as handle:
            handle.readline()
            for line in handle:
                if not line.startswith("# "):
                    break
                key, _, value = line[2:].rstrip("\n").partition("=")
                values[key] = value
        return values
