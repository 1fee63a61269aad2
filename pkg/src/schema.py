import pyarrow as pa
import pandas as pd
from typing import List
from pathlib import Path
from .utils import slurp_json
from .config import report_schemas, schemas_dir
from .errors import ConfigError

TYPE_MAP = {
    "string": pa.string(),
    "int32": pa.int32(),
    "int64": pa.int64(),
    "float32": pa.float32(),
    "float64": pa.float64(),
    "bool": pa.bool_(),
}


def load_schema_from_config(schema_file: Path) -> pa.Schema:
    blob = slurp_json(schema_file)
    if "schema" not in blob:
        raise ConfigError(f"{schema_file} has no 'schema' list")
    return schema_from_list(blob["schema"])


def schema_from_list(schema: List[dict]) -> pa.Schema:
    """Columns are non-nullable unless marked; description and unit go to field metadata."""
    fields = []
    for column in schema:
        arrow_type = TYPE_MAP.get(column["type"].lower())
        if arrow_type is None:
            raise ConfigError(f"Unsupported type '{column['type']}' for column {column['name']}")
        metadata = {
            "description": column.get("description", ""),
            "unit": column.get("unit", ""),
        }
        fields.append(
            pa.field(
                column["name"],
                type=arrow_type,
                nullable=column.get("nullable", False),
                metadata=metadata,
            )
        )
    return pa.schema(fields)


def report_schema(report: str) -> pa.Schema:
    """Schema of a command's table, from ``schemas/``."""
    if report not in report_schemas:
        raise ConfigError(f"No schema registered for '{report}'")
    return load_schema_from_config(schemas_dir / report_schemas[report])


def validate_rows(rows: List[dict], schema: pa.Schema) -> pa.Table:
    """Casts rows onto the schema; fails on missing non-nullable values or type clashes.

    Raises:
        ConfigError: a row does not fit the schema
    """
    try:
        table = pa.Table.from_pylist(
            [{name: row.get(name) for name in schema.names} for row in rows], schema
        )
        table.validate(full=True)
    except (pa.ArrowInvalid, pa.ArrowTypeError) as e:
        raise ConfigError(f"Rows do not match schema: {e}") from e
    for field in schema:
        if not field.nullable and table.column(field.name).null_count:
            raise ConfigError(f"Column {field.name} is not nullable but has missing values")
    return table


def _metadata(field: pa.Field, key: str) -> str:
    if not field.metadata:
        return ""
    return field.metadata.get(key.encode(), b"").decode("utf-8")


def schema_to_markdown_table(schema: pa.Schema) -> str:
    """Markdown table (Column, Type, Unit, Nullable, Description) for the README."""
    frame = pd.DataFrame(
        [
            {
                "Column": field.name,
                "Type": f"`{field.type}`",
                "Unit": _metadata(field, "unit"),
                "Nullable": "Yes" if field.nullable else "No",
                "Description": _metadata(field, "description"),
            }
            for field in schema
        ]
    )
    return frame.to_markdown(index=False)
