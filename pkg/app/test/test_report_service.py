import csv
import json

import pytest

from app.core.config import settings
from app.core.run_config import load_run_config
from app.schemas.run import SAMPLE_COLUMNS, SWEEP_COLUMNS, RunRecord, SweepRow
from app.services.report_service import ReportService
from app.services.run_service import RunService


@pytest.fixture(scope="module")
def single_record():
    cfg = load_run_config(
        preset="fig1-unitary",
        overrides=["cycles=1", "samples_per_cycle=32", "depth=2,2"],
    )
    return RunService.run_single(cfg)


def data_lines(text):
    return [line for line in text.splitlines() if not line.startswith("#")]


def test_csv_has_provenance_and_sample_columns(single_record):
    text = ReportService.render(single_record, "csv")
    lines = text.splitlines()
    assert lines[0] == f"# {settings.APP_NAME} {settings.VERSION}"
    assert "# schema_version=1" in lines
    assert "# preset=fig1-unitary" in lines
    rows = list(csv.DictReader(data_lines(text)))
    assert list(rows[0]) == SAMPLE_COLUMNS
    assert len(rows) == 33
    assert float(rows[-1]["tau"]) == pytest.approx(single_record.rows[-1].tau)


def test_json_carries_the_whole_record(single_record):
    payload = json.loads(ReportService.render(single_record, "json"))
    assert payload["status"] == "ok"
    assert payload["config"]["cycles"] == 1
    assert len(payload["rows"]) == 33
    assert payload["rows"][0]["ratio"] is None
    assert "gauge_defect" in payload["extras"]


def test_sweep_rows_use_sweep_columns():
    record = RunRecord(
        config={"schema_version": 1},
        version="1.0.0",
        sweep=[
            SweepRow(axis1=0.0, N=5, phi_unwrapped=1.0, phi_unitary=2.0, ratio=0.5, revivals=0, min_eig=0.1),
            SweepRow(axis1=1.0, N=5, phi_unitary=2.0, status="divergence", detail="blew up"),
        ],
    )
    rows = list(csv.DictReader(data_lines(ReportService.render(record, "csv"))))
    assert list(rows[0]) == SWEEP_COLUMNS
    assert "detail" not in SWEEP_COLUMNS
    assert rows[1]["status"] == "divergence"
    assert rows[1]["ratio"] == ""


def test_extras_table_is_written():
    record = RunRecord(
        config={},
        version="1.0.0",
        extras={"table": {"columns": ["a", "b"], "rows": [{"a": 1, "b": 2, "c": 3}]}},
    )
    assert data_lines(ReportService.render(record, "csv")) == ["a,b", "1,2"]


def test_write_to_file_and_stdout(single_record, tmp_path, capsys):
    out = tmp_path / "run.json"
    ReportService.write(single_record, "json", out)
    assert json.loads(out.read_text())["version"] == settings.VERSION
    ReportService.write(single_record, "csv")
    assert capsys.readouterr().out.startswith("# ")


def test_csv_header_reloads_as_config(single_record, tmp_path):
    out = tmp_path / "run.csv"
    ReportService.write(single_record, "csv", out)
    values = ReportService.config_from_csv(out)
    assert values["preset"] == "fig1-unitary"
    config_file = tmp_path / "again.env"
    config_file.write_text("\n".join(f"{k}={v}" for k, v in values.items()))
    reloaded = load_run_config(config_file)
    assert reloaded.echo() == single_record.config
