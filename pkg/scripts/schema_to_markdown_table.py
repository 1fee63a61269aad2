#!/usr/bin/env python3

# Add src as a package
import sys
import os

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from argparse import ArgumentParser
from pathlib import Path
from src.config import report_schemas
from src.schema import load_schema_from_config, report_schema, schema_to_markdown_table


def main():
    parser = ArgumentParser(description="Render report schemas as markdown tables for the README")
    parser.add_argument(
        "schema",
        nargs="*",
        help="Report names (analyze, sweep, ...) or paths to .schema.json files. Defaults to every report",
    )
    args = parser.parse_args()

    for name in args.schema or list(report_schemas):
        if name in report_schemas:
            schema = report_schema(name)
            title = f"{name} ({report_schemas[name]})"
        else:
            schema = load_schema_from_config(Path(name))
            title = Path(name).name
        print(f"### {title}\n")
        print(schema_to_markdown_table(schema))
        print()


if __name__ == "__main__":
    main()
