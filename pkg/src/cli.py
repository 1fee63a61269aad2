from argparse import ArgumentParser
from functools import cached_property
from pathlib import Path
from typing import Any, Dict, Optional
import json
import logging
import sys

import pandas as pd

from .errors import ConfigError, InstabilityError, NumericalError
from .reports import Report, run_command
from .scenarios import COMMANDS, MEASURES, load_run_config, parse_tau_grid
from .schema import report_schema, validate_rows
from .utils import open_file
from .writer import Formats, StreamingReportWriter

log = logging.getLogger(__name__)

EXIT_CODES = {ConfigError: 2, InstabilityError: 3, NumericalError: 4}


class Cli:

    def __init__(self, argv=None):
        self.argv = argv
        self.rows = 0
        self.files = 0

    def run(self) -> int:
        """Runs the selected command; returns the exit code instead of raising."""
        if self.args.verbose:
            logging.getLogger().setLevel(logging.DEBUG)
        try:
            report = run_command(self.config)
            self.emit(report)
        except (ConfigError, InstabilityError, NumericalError) as e:
            log.error(f"{type(e).__name__}: {e}")
            return EXIT_CODES[type(e)]
        log.info(f"Wrote {self.rows} rows to {self.files} files")
        for name, value in report.checks.items():
            log.info(f"check {name}: {value}")
        return 0

    def emit(self, report: Report):
        if not self.config.out:
            print(_markdown(report))
            for related in report.related:
                if related.name != "samples":
                    print()
                    print(_markdown(related))
            for name, document in report.documents.items():
                print(f"\n{name}:")
                print(json.dumps(document, indent=2, default=str))
            if self.config.dump_samples:
                self.write_samples(report)
            return

        out = Path(self.config.out)
        fmt = Formats.from_path(out, self.config.format)
        self.write(report, out, fmt)
        for related in report.related:
            if related.name == "samples":
                continue
            self.write(related, _sibling(out, related.name.split("_")[-1], fmt.value), fmt)
        for name, document in report.documents.items():
            path = _sibling(out, name, "json")
            try:
                with open_file(path, mode="wt") as fh:
                    json.dump(document, fh, indent=2, default=str)
            except OSError as e:
                raise ConfigError(f"Cannot write {path}: {e}") from e
            self.files += 1
        if self.config.dump_samples:
            self.write_samples(report)

    def write_samples(self, report: Report):
        for related in report.related:
            if related.name == "samples":
                path = Path(self.config.dump_samples)
                self.write(related, path, Formats.from_path(path))

    def write(self, report: Report, path: Path, fmt: Formats):
        schema = report_schema(report.name)
        validate_rows(report.rows, schema)
        parquet_schema = schema if fmt == Formats.PARQUET else None
        try:
            with StreamingReportWriter(str(path), report.columns, fmt, parquet_schema) as writer:
                writer.write_data(report.rows)
                self.rows += writer.rows_written
        except OSError as e:
            raise ConfigError(f"Cannot write {path}: {e}") from e
        self.files += 1
        log.info(f"Wrote {report.name} to {path}")

    @cached_property
    def args(self):
        parser = self.create_argument_parser()
        return parser.parse_args(self.argv)

    @cached_property
    def config(self):
        return load_run_config(self.args.config, self.args.example, self.overrides)

    @property
    def overrides(self) -> Dict[str, Any]:
        args = self.args
        overrides = {
            "command": args.command,
            "tau": args.tau,
            "eps": args.eps,
            "b": args.b,
            "beta": args.beta,
            "theta": args.theta,
            "weight": args.weight,
            "observables": args.obs,
            "times": args.times,
            "seed": args.seed,
            "samples": args.samples,
            "trajectories": args.trajectories,
            "pool": args.pool,
            "dt": args.dt,
            "burn_in": args.burn_in,
            "nodes": args.nodes,
            "count": args.count,
            "edge_prob": args.edge_prob,
            "measure": args.measure,
            "split": args.split,
            "joint": args.joint or None,
            "verbose": args.verbose or None,
            "out": args.out,
            "format": args.format,
            "dump_samples": args.dump_samples,
        }
        if args.tau_grid:
            overrides["tau_grid"] = list(parse_tau_grid(args.tau_grid))
        if args.graph:
            overrides["graph"] = args.graph
        if args.topology:
            overrides["topology"] = args.topology
            if not args.graph:
                overrides["graph"] = {"topology": args.topology, "weight": args.weight or 1.0}
        return overrides

    def create_argument_parser(self):
        parser = ArgumentParser(
            description="Steady-state and transient systemic risk of noisy consensus networks with delay"
        )
        parser.add_argument(
            "command",
            nargs="?",
            choices=COMMANDS,
            help="What to compute. Defaults to the command of --config/--example, else analyze",
        )
        parser.add_argument(
            "--graph",
            help="Weighted edge list (node count on the first line, then 'i j w' per line) or a JSON {n, edges} file",
            type=str,
        )
        parser.add_argument(
            "--topology",
            help="Canonical family, e.g. complete:5, star:7, ring:8, path:6, wheel:6, bipartite:2,8",
            type=str,
        )
        parser.add_argument("--weight", help="Uniform edge weight for --topology", type=float)
        parser.add_argument("--tau", help="Communication delay", type=float)
        parser.add_argument(
            "--tau-grid",
            help="Delays to sweep as LO:HI:STEP, inclusive of HI when the step lands on it",
            type=str,
        )
        parser.add_argument("--eps", help="Risk threshold (probability level for value-at-risk)", type=float)
        parser.add_argument("--b", help="Noise magnitude", type=float)
        parser.add_argument("--beta", help="Exponential risk aversion", type=float)
        parser.add_argument(
            "--theta", help="Dimensionless aversion; beta = theta / sigma per observable", type=float
        )
        parser.add_argument(
            "--obs",
            action="append",
            help="Observable: deviation:I, pairwise:I,J, neighbor:I, average, centering, all-pairs. Repeatable",
            type=str,
        )
        parser.add_argument(
            "--times",
            "--t",
            nargs="+",
            help="Transient evaluation / checkpoint times",
            type=float,
        )
        parser.add_argument("--seed", help="Base seed for random graphs, Monte Carlo and simulation", type=int)
        parser.add_argument("--samples", help="Monte Carlo draws for joint quantities", type=int)
        parser.add_argument("--trajectories", help="Simulated trajectories", type=int)
        parser.add_argument("--pool", help="Steady pool samples per trajectory", type=int)
        parser.add_argument("--dt", help="Simulator step; must divide tau", type=float)
        parser.add_argument("--burn-in", help="Simulator burn-in before pooling", type=float)
        parser.add_argument("--nodes", help="Graph size for tradeoff", type=int)
        parser.add_argument("--count", help="Random graphs for tradeoff", type=int)
        parser.add_argument("--edge-prob", help="Edge probability for random graphs", type=float)
        parser.add_argument("--measure", choices=MEASURES, help="Risk measure for sweep", type=str)
        parser.add_argument(
            "--split", nargs="+", help="Per-observable probabilities for the joint box", type=float
        )
        parser.add_argument("--joint", action="store_true", help="Add the joint risk report")
        parser.add_argument("--verbose", action="store_true", help="Add cross-checks and alternates")
        parser.add_argument(
            "--out",
            help="Write the table here instead of printing it. Side outputs go next to it. Adding a compression extension (e.g. .gz, .bz2, .xz, .br) will compress the file accordingly",
            type=str,
        )
        parser.add_argument(
            "--format",
            choices=[f.value for f in Formats],
            help="Output format; otherwise taken from the --out suffix",
            type=str,
        )
        parser.add_argument("--dump-samples", help="Write raw simulator samples to this file", type=str)
        parser.add_argument("--example", help="Canned example run (1, 2 or 3)", type=int)
        parser.add_argument("--config", help="YAML or JSON run configuration", type=str)
        return parser


def _sibling(out: Path, tag: str, extension: str) -> Path:
    stem = out.name.split(".")[0]
    return out.with_name(f"{stem}.{tag}.{extension}")


def _markdown(report: Report) -> str:
    frame = pd.DataFrame(report.rows, columns=report.columns)
    return f"## {report.name}\n\n" + frame.to_markdown(index=False, floatfmt=".6g")


def main(argv: Optional[list] = None) -> int:
    return Cli(argv).run()


if __name__ == "__main__":
    sys.exit(main())
