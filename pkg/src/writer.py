from enum import Enum
from pathlib import Path
from typing import List, Optional
from csv import DictWriter
import json
import logging
import math
import pyarrow as pa
import pyarrow.parquet as pq

from .utils import open_file
from .config import parquet
from .errors import ConfigError


class Formats(Enum):
    TSV = "tsv"
    CSV = "csv"
    JSON = "json"
    PARQUET = "parquet"

    def dialect(self) -> str:
        """Return the dialect string for csv.DictWriter based on the format enum.

        Raises:
            ValueError: Does not support JSON or parquet format

        Returns:
            str: The dialect string for csv.DictWriter
        """
        if self in (Formats.PARQUET, Formats.JSON):
            raise ValueError(f"{self.value} format not supported for csv.DictWriter")
        if self == Formats.TSV:
            return "excel-tab"
        return "excel"

    @classmethod
    def from_path(cls, path: str, fallback: Optional[str] = None) -> "Formats":
        """Picks the format from an explicit name or the first known suffix of path."""
        if fallback:
            try:
                return cls(fallback.lower())
            except ValueError as e:
                raise ConfigError(f"Unknown output format '{fallback}'") from e
        for suffix in Path(path).suffixes:
            try:
                return cls(suffix.lstrip(".").lower())
            except ValueError:
                continue
        return cls.CSV


def _json_value(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None if math.isnan(value) else ("inf" if value > 0 else "-inf")
    if hasattr(value, "item"):
        return _json_value(value.item())
    return value


class StreamingReportWriter:
    log = logging.getLogger(__name__)

    def __init__(
        self,
        filename: str,
        columns: List[str],
        format: Formats = Formats.CSV,
        schema: Optional[pa.Schema] = None,
    ):
        """Initalises the writer object with the given filename, columns, and format.

        Args:
            filename (str): File to write the data to. If the file exists it will be overwritten.
            columns (List[str]): Columns to write, in order
            format (Formats): Define the format to write. Defaults to Formats.CSV.
            schema (pa.Schema): Parquet schema; inferred from the first rows when missing
        """
        self.filename = filename
        self.format = format
        self.columns = columns
        self.rows_written = 0
        self._first_write = False
        self._fh = None
        self._writer = None
        self._schema = schema
        self._json_rows = []

    def __enter__(self):
        if not self._writer:
            self._open()
        return self

    def _open(self):
        # parquet waits for data so the first table can fix the schema
        if self.format in (Formats.PARQUET, Formats.JSON):
            pass
        else:
            self._fh = open_file(self.filename, mode="wt")
            self._writer = DictWriter(
                self._fh,
                fieldnames=self.columns,
                dialect=self.format.dialect(),
                extrasaction="ignore",
            )
            self._writer.writeheader()

    def __exit__(self, exc_type, exc_value, traceback):
        if self.format == Formats.JSON and not exc_type:
            with open_file(self.filename, mode="wt") as fh:
                json.dump(self._json_rows, fh, indent=2)
        if self._fh:
            self._fh.close()
        if exc_type:
            self.log.error(f"Writing {self.filename} failed: {exc_value}")

    def write_data(self, data: List[dict], flush: bool = False) -> None:
        """Writes rows to the output. Keys outside the configured columns are
        dropped; missing keys are written empty.

        Args:
            data (List[dict]): Rows to write
            flush (bool): Flush the file handle after every row
        """
        if self.format == Formats.PARQUET:
            self._write_parquet(data)
        elif self.format == Formats.JSON:
            self._json_rows.extend(
                {column: _json_value(row.get(column)) for column in self.columns} for row in data
            )
        else:
            self._write_csv(data, flush=flush)
        self.rows_written += len(data)

    def _write_parquet(self, data) -> None:
        rows = [{column: row.get(column) for column in self.columns} for row in data]
        if not self._first_write:
            first_table = pa.Table.from_pylist(rows, self._schema)
            writer = pq.ParquetWriter(
                self.filename,
                first_table.schema,
                compression=parquet["compression"],
                compression_level=parquet["compression_level"],
            )
            self._writer = writer
            self._fh = writer
            self._schema = first_table.schema
            self._first_write = True
            self._writer.write_table(first_table)
        else:
            table = pa.Table.from_pylist(rows, self._schema)
            self._writer.write_table(table)

    def _write_csv(self, data, flush: bool = False) -> None:
        if not self._writer:
            self._open()
        for row in data:
            self._writer.writerow(row)
            if flush:
                self._fh.flush()

    def close(self):
        self._fh.close()
