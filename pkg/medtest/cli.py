"""Command-line entry point.

    medtest analyze --data FILE --family linear --exposure X --outcome Y
        --mediators M1 M2
    medtest simulate scenarios/linear_size_power.json --threads 4 --out results/linear
    medtest power --mu-alpha 3 --mu-beta 3 --prob-tmax-ge 1
    medtest qq pvalues.csv

Exit codes: 0 on success, 2 for usage and configuration errors, 3 for data
errors and 4 for numerical failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import ValidationError

from medtest._version import __version__
from medtest.analysis import AnalysisReport, MediationAnalysis
from medtest.configuration import AnalysisSpec, InvalidConfiguration, SimulationPlan
from medtest.defaults import (
    DEFAULT_DELTA,
    DEFAULT_POWER_DRAWS,
    DEFAULT_SEED,
    FITTER_PRESETS,
    MAX_UINT64,
    SEED_ENV_VAR,
)
from medtest.dist import RngStream
from medtest.errors import (
    DataError,
    DomainError,
    InvalidDatasetError,
    MediatorFitError,
    MissingColumnError,
    NonNumericCellError,
    NumericalError,
)
from medtest.models import Dataset
from medtest.simulate import qq_data, run_plan, summary_rows
from medtest.tests import (
    theoretical_power_ajs,
    theoretical_power_asobel,
    theoretical_power_js,
)
from medtest.utils.constants import NaPolicy, OutcomeFamily

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

FLOAT_FORMAT = "%.17g"
FORMATS = ("csv", "json", "table")

SEED_NOT_VALID = SEED_ENV_VAR + ": must be an integer in [0, 2**64). Not {!r}."
UNREADABLE_CSV = "Cannot read CSV file {}: {}"


def _env_seed() -> Optional[int]:
    raw = os.environ.get(SEED_ENV_VAR)
    if raw is None or raw.strip() == "":
        return None
    try:
        seed = int(raw)
    except ValueError:
        raise InvalidConfiguration(SEED_NOT_VALID.format(raw)) from None
    if not 0 <= seed <= MAX_UINT64:
        raise InvalidConfiguration(SEED_NOT_VALID.format(raw))
    return seed


def _parse_cell(value: str) -> float:
    try:
        number = float(value)
    except ValueError:
        return math.nan
    return number if math.isfinite(number) else math.nan


def read_csv_columns(
    path: str, columns: Sequence[str], na_policy: NaPolicy = NaPolicy.DROP_ROWS
) -> Tuple[pd.DataFrame, int]:
    """Read the named columns of a CSV file as finite floats.

    Cells are parsed one by one with the shortest round-trip float reader, so
    a file written with 17 significant digits reads back bit for bit.

    Returns:
        The numeric columns and the number of rows dropped.

    Raises:
        DataError: for an unreadable file.
        MissingColumnError: for a column absent from the header.
        NonNumericCellError: for the first bad cell under `na_policy=error`,
            with its 1-based data row.
    """
    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except (OSError, UnicodeDecodeError, pd.errors.ParserError) as e:
        raise DataError(UNREADABLE_CSV.format(path, e)) from e
    except pd.errors.EmptyDataError as e:
        raise InvalidDatasetError(UNREADABLE_CSV.format(path, e)) from e
    for column in columns:
        if column not in raw.columns:
            raise MissingColumnError(column, raw.columns)
    numeric = pd.DataFrame({column: raw[column].map(_parse_cell) for column in columns})
    bad = numeric.isna()
    if na_policy == NaPolicy.ERROR and bad.to_numpy().any():
        row, col = np.argwhere(bad.to_numpy())[0]
        column = columns[col]
        raise NonNumericCellError(int(row) + 1, column, raw[column].iloc[row])
    keep = ~bad.any(axis=1)
    dropped = int((~keep).sum())
    if dropped:
        logger.warning("Dropped %d row(s) with missing or non-numeric cells", dropped)
    return numeric[keep].reset_index(drop=True), dropped


def read_dataset(spec: AnalysisSpec) -> Tuple[Dataset, int]:
    """Build a `Dataset` from the columns named by an analysis spec."""
    spec.validate()
    frame, dropped = read_csv_columns(spec.data_path, spec.used_columns, spec.na_policy)
    covariates = None
    if spec.covariate_columns:
        covariates = frame[spec.covariate_columns].to_numpy()
    block: Dict[str, Any] = {}
    if spec.outcome_family == OutcomeFamily.COX:
        block["time"] = frame[spec.time_column].to_numpy()
        block["event"] = frame[spec.event_column].to_numpy()
    else:
        block["outcome"] = frame[spec.outcome_column].to_numpy()
    dataset = Dataset(
        exposure=frame[spec.exposure_column].to_numpy(),
        mediators=frame[spec.mediator_columns].to_numpy(),
        covariates=covariates,
        mediator_names=list(spec.mediator_columns),
        **block,
    )
    return dataset, dropped


def write_dataset_csv(dataset: Dataset, path: Optional[str] = None) -> str:
    """Serialise a dataset as CSV with 17 significant digits.

    Columns are X, the mediators (by name, or M1..Md), Z1..Zq, then Y or
    time and event. Returns the CSV text and writes it to `path` if given.
    """
    names = dataset.mediator_names or [f"M{k}" for k in range(1, dataset.d + 1)]
    columns: Dict[str, Any] = {"X": dataset.exposure}
    for k, name in enumerate(names):
        columns[name] = dataset.mediators[:, k]
    for j in range(dataset.q):
        columns[f"Z{j + 1}"] = dataset.covariates[:, j]  # type: ignore[index]
    if dataset.is_survival:
        columns["time"] = dataset.time
        columns["event"] = dataset.event
    else:
        columns["Y"] = dataset.outcome
    return _write_frame(pd.DataFrame(columns), path)


def _write_frame(frame: pd.DataFrame, path: Optional[str] = None) -> str:
    text = str(
        frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    )
    if path is not None:
        _write_text(path, text)
    return text


def _write_text(path: str, text: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as out_file:
        out_file.write(text)


def _dump_json(payload: Any) -> str:
    return json.dumps(payload, indent=2) + "\n"


def _display(frame: pd.DataFrame, header: Sequence[str] = ()) -> str:
    lines = list(header)
    lines.append(frame.to_string(index=False, float_format=lambda v: f"{v:.4f}"))
    return "\n".join(lines) + "\n"


def _emit(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        _write_text(out, text)
        logger.info("Wrote %s", out)


def _render(
    frame: pd.DataFrame,
    payload: Dict[str, Any],
    fmt: str,
    header: Sequence[str] = (),
) -> str:
    if fmt == "json":
        return _dump_json(payload)
    if fmt == "table":
        return _display(frame, header)
    return _write_frame(frame)


def cmd_analyze(args: argparse.Namespace) -> int:
    spec = AnalysisSpec.from_dict(
        {
            "data_path": args.data,
            "exposure_column": args.exposure,
            "mediator_columns": args.mediators,
            "covariate_columns": args.covariates,
            "outcome_family": args.family,
            "outcome_column": args.outcome,
            "time_column": args.time,
            "event_column": args.event,
            "delta": args.delta,
            "na_policy": args.na_policy,
        }
    )
    dataset, dropped = read_dataset(spec)
    analysis = MediationAnalysis(
        spec.outcome_family, spec.delta, FITTER_PRESETS[args.fitter]
    )
    try:
        report = analysis.report(dataset, rows_dropped=dropped)
    except MediatorFitError as e:
        where = (
            "outcome model"
            if e.mediator_index is None
            else f"mediator column {spec.mediator_columns[e.mediator_index - 1]!r}"
        )
        raise NumericalError(f"Fitting failed for {where}: {e.error}") from e
    _emit(_render_report(report, args.format), args.out)
    return EXIT_OK


def _render_report(report: AnalysisReport, fmt: str) -> str:
    header = [
        f"family={report.family} n={report.n} rows_dropped={report.rows_dropped} "
        f"d={report.d} delta={report.delta:g} threshold={report.threshold:.6g} "
        f"lambda_n={report.lambda_n:.6g}"
    ]
    frame = report.to_frame()
    if fmt == "csv":
        return f"# rows_dropped={report.rows_dropped}\n" + _write_frame(frame)
    return _render(frame, report.model_dump(mode="json"), fmt, header)


def _load_plan(path: str, seed: Optional[int], reps: Optional[int]) -> SimulationPlan:
    try:
        with open(path, encoding="utf-8") as config_file:
            conf = json.load(config_file)
    except (OSError, json.JSONDecodeError) as e:
        raise InvalidConfiguration(f"{path}: cannot read simulation plan ({e})") from e
    env_seed = _env_seed()
    if isinstance(conf, dict) and "base_seed" not in conf and env_seed is not None:
        conf["base_seed"] = env_seed
    return SimulationPlan.from_dict(conf).with_overrides(reps=reps, base_seed=seed)


def cmd_simulate(args: argparse.Namespace) -> int:
    """Run a plan. Stdout gets one `--format`; `--out` writes the CSV and JSON."""
    plan = _load_plan(args.config, args.seed, args.reps)
    summaries = run_plan(plan, workers=args.threads)
    table = summary_rows(summaries)
    payload = {
        "plan": plan.name,
        "study": str(plan.study),
        "version": __version__,
        "summaries": [summary.model_dump(mode="json") for summary in summaries],
    }
    if args.out is None:
        sys.stdout.write(_render(table, payload, args.format, [f"plan={plan.name}"]))
        return EXIT_OK
    stem = str(Path(args.out).with_suffix(""))
    _write_frame(table, stem + ".csv")
    _write_text(stem + ".json", _dump_json(payload))
    logger.info("Wrote %s.csv and %s.json", stem, stem)
    return EXIT_OK


def cmd_power(args: argparse.Namespace) -> int:
    seed = args.seed if args.seed is not None else _env_seed()
    rng = RngStream(DEFAULT_SEED if seed is None else seed)
    js = theoretical_power_js(args.mu_alpha, args.mu_beta, args.delta)
    ajs = theoretical_power_ajs(
        args.mu_alpha, args.mu_beta, args.delta, args.prob_tmax_ge
    )
    asobel = theoretical_power_asobel(
        args.mu_alpha,
        args.mu_beta,
        args.delta,
        args.prob_tmax_ge,
        draws=args.draws,
        rng=rng,
    )
    frame = pd.DataFrame(
        {
            "method": ["JS", "AJS", "ASobel"],
            "power": [js, ajs, asobel.power],
            "standard_error": [None, None, asobel.standard_error],
        }
    )
    payload = {
        "mu_alpha": args.mu_alpha,
        "mu_beta": args.mu_beta,
        "delta": args.delta,
        "prob_tmax_ge": args.prob_tmax_ge,
        "draws": args.draws,
        "JS": js,
        "AJS": ajs,
        "ASobel": asobel.power,
        "ASobel_se": asobel.standard_error,
    }
    _emit(_render(frame, payload, args.format), args.out)
    return EXIT_OK


def cmd_qq(args: argparse.Namespace) -> int:
    try:
        header = pd.read_csv(args.pvalues, dtype=str, nrows=0, encoding="utf-8")
    except (OSError, UnicodeDecodeError, pd.errors.ParserError) as e:
        raise DataError(UNREADABLE_CSV.format(args.pvalues, e)) from e
    except pd.errors.EmptyDataError as e:
        raise InvalidDatasetError(UNREADABLE_CSV.format(args.pvalues, e)) from e
    column = args.column
    if column is None:
        if len(header.columns) != 1:
            raise InvalidDatasetError(
                f"Expected a single p-value column, got {list(header.columns)}; "
                "pick one with --column"
            )
        column = header.columns[0]
    frame, _ = read_csv_columns(args.pvalues, [column], NaPolicy.ERROR)
    pairs = qq_data(frame[column].to_numpy())
    table = pd.DataFrame(pairs, columns=["uniform_quantile", "sorted_p"])
    payload = {"column": column, "pairs": [list(pair) for pair in pairs]}
    _emit(_render(table, payload, args.format), args.out)
    return EXIT_OK


def _add_output_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--format", choices=FORMATS, default="csv")
    parser.add_argument("--out", default=None, help="Output file (default: stdout).")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="medtest",
        description="Adaptive tests and intervals for mediation effects.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument(
        "-v",
        "--verbose",
        action="count",
        default=0,
        help="-v for progress messages, -vv for fitter details.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    analyze = subparsers.add_parser(
        "analyze", help="Test every mediator of a CSV dataset."
    )
    analyze.add_argument("--data", required=True, help="CSV file with a header row.")
    analyze.add_argument("--exposure", required=True)
    analyze.add_argument("--mediators", nargs="+", required=True)
    analyze.add_argument("--covariates", nargs="*", default=[])
    analyze.add_argument("--family", required=True, choices=OutcomeFamily.list())
    analyze.add_argument("--outcome", default=None)
    analyze.add_argument("--time", default=None)
    analyze.add_argument("--event", default=None)
    analyze.add_argument("--delta", type=float, default=DEFAULT_DELTA)
    analyze.add_argument(
        "--na-policy", choices=NaPolicy.list(), default=str(NaPolicy.DROP_ROWS)
    )
    analyze.add_argument("--fitter", choices=sorted(FITTER_PRESETS), default="default")
    _add_output_flags(analyze)
    analyze.set_defaults(handler=cmd_analyze)

    simulate = subparsers.add_parser("simulate", help="Run a simulation plan.")
    simulate.add_argument("config", help="JSON simulation plan.")
    simulate.add_argument("--seed", type=int, default=None)
    simulate.add_argument("--reps", type=int, default=None)
    simulate.add_argument("--threads", type=int, default=1)
    simulate.add_argument(
        "--format",
        choices=FORMATS,
        default="csv",
        help="Format written to stdout when --out is not given.",
    )
    simulate.add_argument(
        "--out",
        default=None,
        help="Output path stem; writes both <stem>.csv and <stem>.json.",
    )
    simulate.set_defaults(handler=cmd_simulate)

    power = subparsers.add_parser(
        "power", help="Theoretical power of JS, AJS and ASobel."
    )
    power.add_argument("--mu-alpha", type=float, required=True)
    power.add_argument("--mu-beta", type=float, required=True)
    power.add_argument("--delta", type=float, default=DEFAULT_DELTA)
    power.add_argument("--prob-tmax-ge", type=float, default=1.0)
    power.add_argument("--draws", type=int, default=DEFAULT_POWER_DRAWS)
    power.add_argument("--seed", type=int, default=None)
    _add_output_flags(power)
    power.set_defaults(handler=cmd_power)

    qq = subparsers.add_parser("qq", help="Q-Q plot data of p-values against U(0, 1).")
    qq.add_argument("pvalues", help="CSV file with a p-value column.")
    qq.add_argument("--column", default=None)
    _add_output_flags(qq)
    qq.set_defaults(handler=cmd_qq)
    return parser


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity > 1:
        level = logging.DEBUG
    logging.basicConfig(
        level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s"
    )


_EXIT_CODES: List[Tuple[type, int]] = [
    (InvalidConfiguration, EXIT_USAGE),
    (ValidationError, EXIT_USAGE),
    (DomainError, EXIT_USAGE),
    (DataError, EXIT_DATA),
    (NumericalError, EXIT_NUMERICAL),
]


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    _configure_logging(args.verbose)
    handler: Callable[[argparse.Namespace], int] = args.handler
    try:
        return handler(args)
    except tuple(error for error, _ in _EXIT_CODES) as e:
        code = next(code for error, code in _EXIT_CODES if isinstance(e, error))
        sys.stderr.write(f"medtest {args.command}: {e}\n")
        return code


if __name__ == "__main__":
    sys.exit(main())
