# Copyright (c) 2024 The migraflow Developers
# Released under the MIT License; see the LICENSE file at the repository root.

"""Command line interface: ``migraflow validate|flows|simulate|calibrate``.

Exit codes: 0 on success, 1 on input or validation errors, 2 on degenerate computations.
Outputs are staged in a temporary directory next to ``--out`` and moved into place only when
every file was written.
"""

import argparse
import logging
import os
import shutil
import sys
import tempfile
from contextlib import contextmanager
from dataclasses import replace
from pathlib import Path

from migraflow import default_settings, io_ingest
from migraflow.calibration import fit_coulomb_coupling, fit_gravity_params
from migraflow.core_model import ScenarioConfig, validate_scenario
from migraflow.coulomb import derive_charges
from migraflow.dynamics import compute_flow_matrix, run
from migraflow.exceptions import (
    ConfigurationError,
    DegenerateFitError,
    IngestError,
    InvalidInputError,
    ScenarioValidationError,
    SimulationError,
)
from migraflow.helper_functions import format_number
from migraflow.version import __version__

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_DEGENERATE = 2

CONSERVATION_RTOL = 1e-9


def build_parser():
    parser = argparse.ArgumentParser(
        prog="migraflow",
        description="Migration flows between regions from economic charges, gravity and NPV models.",
        allow_abbrev=False,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "--log-level",
        default="WARNING",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Verbosity of the log on standard error.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    validate = commands.add_parser("validate", help="Check a scenario and list every violation.", allow_abbrev=False)
    _add_scenario_arguments(validate)
    validate.set_defaults(handler=cmd_validate)

    flows = commands.add_parser("flows", help="Compute one flow matrix.", allow_abbrev=False)
    _add_scenario_arguments(flows)
    flows.add_argument("--out", required=True, help="Output directory for flows.csv and summary.txt.")
    flows.set_defaults(handler=cmd_flows)

    simulate = commands.add_parser("simulate", help="Run the population dynamics.", allow_abbrev=False)
    _add_scenario_arguments(simulate)
    simulate.add_argument("--out", required=True, help="Output directory for the time series and final state.")
    simulate.add_argument("--progress", action="store_true", help="Show a progress bar.")
    simulate.set_defaults(handler=cmd_simulate)

    calibrate = commands.add_parser("calibrate", help="Fit model constants to observed flows.", allow_abbrev=False)
    calibrate.add_argument("--regions", required=True, help="Region table (CSV).")
    calibrate.add_argument("--distances", help="Distance matrix (CSV); coordinates are used when omitted.")
    calibrate.add_argument("--observed", required=True, help="Observed flow matrix (CSV).")
    calibrate.add_argument("--model", required=True, choices=["coulomb", "gravity"], help="Model to fit.")
    calibrate.add_argument("--config", help="Scenario document supplying epsilon, charges and c0/c1.")
    calibrate.add_argument("--out", required=True, help="Output directory for fit.txt and residuals.csv.")
    calibrate.set_defaults(handler=cmd_calibrate)
    return parser


def main(argv=None):
    """Runs one command and returns its exit code."""

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return EXIT_OK if err.code in (0, None) else EXIT_INPUT_ERROR

    logging.basicConfig(level=getattr(logging, args.log_level), format="%(levelname)s: %(message)s")
    try:
        return args.handler(args)
    except ScenarioValidationError as err:
        print(f"Scenario has {len(err.violations)} violation(s):")
        for violation in err.violations:
            print(f"  - {violation}")
        return EXIT_INPUT_ERROR
    except (IngestError, ConfigurationError, InvalidInputError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except (DegenerateFitError, SimulationError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DEGENERATE


def cmd_validate(args):
    scenario = _load_scenario(args)
    positioned = sum(r.position is not None for r in scenario.regions)
    print(
        f"Scenario is valid: {len(scenario.regions)} regions ({positioned} with coordinates), "
        f"model {scenario.config.model}"
    )
    return EXIT_OK


def cmd_flows(args):
    scenario = _load_scenario(args)
    flows = compute_flow_matrix(scenario)
    corridors = flows.top_corridors()

    lines = [
        f"model = {scenario.config.model}",
        f"regions = {len(flows)}",
        f"total_flow = {format_number(flows.total())}",
        f"top_corridors = {len(corridors)}",
    ]
    lines += [f"{origin} -> {destination} = {format_number(value)}" for origin, destination, value in corridors]
    summary = "\n".join(lines) + "\n"

    with staged_output(args.out) as staging:
        io_ingest.write_flow_matrix(flows, staging / default_settings.OUTPUT_FILES["flows"])
        _write_text(staging / default_settings.OUTPUT_FILES["summary"], summary)
    print(summary, end="")
    return EXIT_OK


def cmd_simulate(args):
    scenario = _load_scenario(args)
    series, final = run(scenario, progress=args.progress)

    drift = series.conservation_drift()
    if not drift < CONSERVATION_RTOL:
        raise SimulationError(f"total population drifted by {drift:.3e} (relative), above {CONSERVATION_RTOL:g}")

    overrides = scenario.charge_overrides or None
    with staged_output(args.out) as staging:
        io_ingest.write_timeseries(series, staging / default_settings.OUTPUT_FILES["timeseries"])
        io_ingest.write_regions(final.regions, staging / default_settings.OUTPUT_FILES["final_state"], overrides)
        io_ingest.write_flow_matrix(final.cumulative, staging / default_settings.OUTPUT_FILES["flows_cumulative"])

    print(f"steps = {final.step}")
    print(
        f"conservation: initial {format_number(series.total_population(0))}, "
        f"final {format_number(final.total_population())}, drift {drift:.3e} < {CONSERVATION_RTOL:g} OK"
    )
    return EXIT_OK


def cmd_calibrate(args):
    config = io_ingest.load_config(args.config) if args.config else ScenarioConfig()
    config = replace(config, model=args.model)
    regions, overrides = io_ingest.load_regions(args.regions)
    explicit = io_ingest.load_distance_matrix(args.distances) if args.distances else None
    scenario = validate_scenario(config, regions, io_ingest.resolve_distances(regions, explicit), overrides)
    observed = io_ingest.load_flow_matrix(args.observed, region_ids=scenario.ids)

    if args.model == "coulomb":
        charges = derive_charges(scenario.regions, config.charge_source, config.charge_threshold, overrides)
        result = fit_coulomb_coupling(
            observed, charges, scenario.distances, epsilon=config.epsilon if args.config else None
        )
    else:
        result = fit_gravity_params(observed, scenario.regions, scenario.economic_distances)

    residuals = result.residuals.copy()
    for column in ("observed", "predicted", "residual"):
        residuals[column] = residuals[column].map(format_number)

    report = result.to_text()
    with staged_output(args.out) as staging:
        _write_text(staging / default_settings.OUTPUT_FILES["fit"], report)
        residuals.to_csv(staging / default_settings.OUTPUT_FILES["residuals"], index=False, lineterminator="\n")
    print(report, end="")
    return EXIT_OK


@contextmanager
def staged_output(out_dir):
    """Yields a temporary directory whose files are moved into ``out_dir`` when the block succeeds.

    Nothing reaches ``out_dir`` if the block raises.
    """

    out_dir = Path(out_dir)
    if out_dir.exists() and not out_dir.is_dir():
        raise IngestError(f"{out_dir}: output path exists and is not a directory")
    try:
        out_dir.parent.mkdir(parents=True, exist_ok=True)
        staging = Path(tempfile.mkdtemp(prefix=f".{out_dir.name}.", dir=out_dir.parent))
    except OSError as err:
        raise IngestError(f"{out_dir}: cannot create output directory: {err}") from err

    try:
        yield staging
        if out_dir.exists():
            for produced in sorted(staging.iterdir()):
                os.replace(produced, out_dir / produced.name)
        else:
            os.replace(staging, out_dir)
    except OSError as err:
        raise IngestError(f"{out_dir}: cannot write outputs: {err}") from err
    finally:
        shutil.rmtree(staging, ignore_errors=True)


def _add_scenario_arguments(parser):
    parser.add_argument("--regions", required=True, help="Region table (CSV).")
    parser.add_argument("--distances", help="Distance matrix (CSV); coordinates are used when omitted.")
    parser.add_argument("--config", required=True, help="Scenario document (YAML).")


def _load_scenario(args):
    return io_ingest.load_scenario(args.regions, args.config, args.distances)


def _write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)


if __name__ == "__main__":
    sys.exit(main())
