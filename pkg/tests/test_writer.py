import csv
import gzip
import json
import math

import pyarrow.parquet as pq
import pytest
from src.errors import ConfigError
from src.schema import report_schema
from src.writer import Formats, StreamingReportWriter

COLUMNS = ["tau", "safe", "marginal", "unsafe"]
ROWS = [
    {"tau": 0.1, "safe": 3, "marginal": 1, "unsafe": 0, "ignored": "x"},
    {"tau": 0.2, "safe": 1, "marginal": 2, "unsafe": 1},
]


@pytest.mark.parametrize(
    "path,fallback,expected",
    [
        ("out.tsv", None, Formats.TSV),
        ("out.csv.gz", None, Formats.CSV),
        ("out.parquet", None, Formats.PARQUET),
        ("out.json.br", None, Formats.JSON),
        ("out", None, Formats.CSV),
        ("out.csv", "TSV", Formats.TSV),
    ],
)
def test_format_from_path(path, fallback, expected):
    assert Formats.from_path(path, fallback) == expected


def test_unknown_format_name():
    with pytest.raises(ConfigError):
        Formats.from_path("out.csv", "xlsx")


def test_dialect():
    assert Formats.TSV.dialect() == "excel-tab"
    assert Formats.CSV.dialect() == "excel"
    with pytest.raises(ValueError):
        Formats.PARQUET.dialect()


def test_tsv_drops_extra_keys(tmp_path):
    path = tmp_path / "sweep.tsv"
    with StreamingReportWriter(str(path), COLUMNS, Formats.TSV) as writer:
        writer.write_data(ROWS)
    assert writer.rows_written == 2
    lines = path.read_text().splitlines()
    assert lines[0].split("\t") == COLUMNS
    assert lines[1].split("\t") == ["0.1", "3", "1", "0"]


def test_compressed_csv(tmp_path):
    path = tmp_path / "sweep.csv.gz"
    with StreamingReportWriter(str(path), COLUMNS, Formats.CSV) as writer:
        writer.write_data(ROWS[:1])
        writer.write_data(ROWS[1:], flush=True)
    with gzip.open(path, "rt") as fh:
        rows = list(csv.DictReader(fh))
    assert [row["unsafe"] for row in rows] == ["0", "1"]


def test_json_writes_infinity_as_text(tmp_path):
    path = tmp_path / "risk.json"
    rows = [{"tau": 0.1, "value": math.inf}, {"tau": 0.2, "value": math.nan}]
    with StreamingReportWriter(str(path), ["tau", "value"], Formats.JSON) as writer:
        writer.write_data(rows)
    assert json.loads(path.read_text()) == [
        {"tau": 0.1, "value": "inf"},
        {"tau": 0.2, "value": None},
    ]


def test_parquet_follows_schema(tmp_path):
    path = tmp_path / "sweep.parquet"
    rows = [dict(row, safe_connectivity=None) for row in ROWS]
    columns = COLUMNS + ["safe_connectivity"]
    schema = report_schema("sweep")
    with StreamingReportWriter(str(path), columns, Formats.PARQUET, schema) as writer:
        writer.write_data(rows[:1])
        writer.write_data(rows[1:])
    table = pq.read_table(path)
    assert table.num_rows == 2
    assert table.schema.field("safe").type == schema.field("safe").type
    assert table.column("unsafe").to_pylist() == [0, 1]
