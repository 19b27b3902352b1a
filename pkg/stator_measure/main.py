"""
Command-line front end.

    run     run one protocol on one input, print the branch tree or a sampled trajectory
    table   derive the record-keyed outcome table of a family
    verify  run verification suites through the suite graph
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from typing import Optional, Sequence

from pydantic import ValidationError

import verify
from eigenbasis import EigenbasisSpec, Family
from errors import ParameterError, ResourceError, SimulationError, StructuralError
from protocols import ProtocolRun, run_protocol
from report_templates import format_run_report, format_table
from state_helper import SUITES
from structure_outputs import (
    AngleOutput,
    BranchOutput,
    RecordEntryOutput,
    RunConfig,
    RunOutput,
    StateOutput,
    SuiteOutput,
    TableBlockOutput,
    TableOutput,
)
from suite_runner import VerificationSuiteRunner
from utils import configure_logging, draw_graph, parse_angle, parse_input

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2

CSV_COLUMNS = ("family", "alpha", "beta", "n", "branch_id", "prob", "alice_record", "bob_record", "inferred")
SWEEP_COLUMNS = ("family", "alpha", "alpha_label", "n", "stage_label", "enumerated", "loop_form",
                 "quoted_form", "closing_n")


def create_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stator-measure",
                                     description="Instantaneous two-party measurements with stators")
    parser.add_argument("--debug", action="store_true", help="DEBUG logging")
    sub = parser.add_subparsers(dest="command", required=True)

    families = [family.value for family in Family]
    run = sub.add_parser("run", help="Run one protocol on one input")
    run.add_argument("--family", required=True, choices=families)
    _add_angle_flags(run)
    run.add_argument("--u-axis", default="y", help="Axis T of U_B = exp(i theta sigma_T)")
    run.add_argument("--u-angle", default="0", help="Angle theta of U_B")
    run.add_argument("--n-ebits", type=int, default=None, help="Ebit budget (family default when omitted)")
    run.add_argument("--input", default="eigen:1", help="eigen:k, a bitstring, or comma-separated amplitudes")
    run.add_argument("--mode", choices=["enumerate", "sample"], default="enumerate")
    run.add_argument("--seed", type=int, default=None, help="64-bit seed for sample mode")
    run.add_argument("--format", choices=["text", "json", "csv"], default="text")

    table = sub.add_parser("table", help="Derive a record-keyed outcome table")
    table.add_argument("--family", required=True,
                       choices=[Family.TWISTED_PRODUCT.value, Family.NONMAX_EQUAL.value, Family.NONMAX_GENERAL.value])
    _add_angle_flags(table)
    table.add_argument("--format", choices=["text", "json"], default="text")

    check = sub.add_parser("verify", help="Run verification suites")
    check.add_argument("--suite", action="append", choices=list(SUITES) + ["all"], default=None,
                       help="Suite to run, repeatable (default: all)")
    check.add_argument("--alpha-steps", type=int, default=None, help="Sweep grid: alpha = pi*j/steps")
    check.add_argument("--n-max", type=int, default=None, help="Sweep grid: ebit budgets 1..n-max")
    check.add_argument("--inputs", type=int, default=None, help="Random inputs per family for the Born suite")
    check.add_argument("--seed", type=int, default=None, help="Seed of the random inputs")
    check.add_argument("--format", choices=["text", "json", "csv"], default="text",
                       help="csv emits the success sweep")
    check.add_argument("--graph", action="store_true", help="Print the suite graph as Mermaid and exit")
    return parser


def _add_angle_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--alpha", default="pi/2", help="Radians or a fraction of pi such as 3pi/8")
    parser.add_argument("--beta", default=None, help="Second angle of nonmax-general (defaults to alpha)")
    parser.add_argument("--phi1", default="0", help="Phase on |11> of nonmax-general")
    parser.add_argument("--phi2", default="0", help="Phase on |10> of nonmax-general")


# run

def _spec_from_config(config: RunConfig) -> EigenbasisSpec:
    return EigenbasisSpec(
        Family(config.family),
        alpha=config.alpha.value,
        beta=None if config.beta is None else config.beta.value,
        phi1=config.phi1.value,
        phi2=config.phi2.value,
        u_axis=config.u_axis,
        u_angle=config.u_angle.value,
        n_ebits=config.n_ebits,
    )


def _parameters(config: RunConfig, spec: EigenbasisSpec) -> dict[str, AngleOutput]:
    if spec.family is Family.TWIST_4X4:
        return {"u_angle": config.u_angle}
    if spec.family is Family.TWISTED_PRODUCT:
        return {"alpha": AngleOutput(value=spec.alpha, symbolic="pi/2")}
    if spec.family is Family.NONMAX_GENERAL:
        beta = config.beta or config.alpha
        return {"alpha": config.alpha, "beta": beta, "phi1": config.phi1, "phi2": config.phi2}
    return {"alpha": config.alpha}


def build_run_output(config: RunConfig, spec: EigenbasisSpec, run: ProtocolRun) -> RunOutput:
    branches = [
        BranchOutput(
            branch_id=i,
            probability=branch.probability,
            alice_record=[RecordEntryOutput(label=e.label, value=e.value) for e in branch.alice_record],
            bob_record=[RecordEntryOutput(label=e.label, value=e.value) for e in branch.bob_record],
            inferred=branch.inferred,
            post_state=StateOutput(
                qubits=list(branch.post_state.names),
                amplitudes=[(float(a.real), float(a.imag)) for a in branch.post_state.amplitudes],
            ),
        )
        for i, branch in enumerate(run.branches)
    ]
    return RunOutput(
        family=spec.family.value,
        parameters=_parameters(config, spec),
        u_axis=spec.u_axis if spec.family is Family.TWIST_4X4 else None,
        n_ebits=spec.n_ebits,
        mode=config.mode,
        seed=config.seed if config.mode == "sample" else None,
        ebits_consumed=run.ebits_consumed,
        residual_entanglement=run.residual_entanglement,
        success_probability=run.success_probability,
        distribution=[float(p) for p in run.outcome_distribution()],
        branches=branches,
    )


def _record_cell(entries: list[RecordEntryOutput]) -> str:
    return ";".join(f"{entry.label}={entry.value:+d}" for entry in entries)


def format_run_csv(output: RunOutput) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    alpha = output.parameters.get("alpha") or output.parameters.get("u_angle")
    beta = output.parameters.get("beta")
    for branch in output.branches:
        writer.writerow([
            output.family,
            repr(alpha.value) if alpha else "",
            repr(beta.value) if beta else "",
            output.n_ebits,
            branch.branch_id,
            repr(branch.probability),
            _record_cell(branch.alice_record),
            _record_cell(branch.bob_record),
            "Failure" if branch.inferred is None else branch.inferred,
        ])
    return buffer.getvalue()


def cmd_run(args: argparse.Namespace) -> int:
    config = RunConfig(
        family=args.family,
        alpha=parse_angle(args.alpha),
        beta=None if args.beta is None else parse_angle(args.beta),
        phi1=parse_angle(args.phi1),
        phi2=parse_angle(args.phi2),
        u_axis=args.u_axis,
        u_angle=parse_angle(args.u_angle),
        n_ebits=args.n_ebits,
        input=args.input,
        mode=args.mode,
        seed=args.seed,
        format=args.format,
    )
    spec = _spec_from_config(config)
    input_state = parse_input(config.input, spec)
    seed = config.seed if config.mode == "sample" else None
    run = run_protocol(spec, input_state, seed=seed)
    output = build_run_output(config, spec, run)
    if config.format == "json":
        sys.stdout.write(output.model_dump_json(by_alias=True, indent=2) + "\n")
    elif config.format == "csv":
        sys.stdout.write(format_run_csv(output))
    else:
        sys.stdout.write(format_run_report(output))
    return EXIT_OK


# table

def cmd_table(args: argparse.Namespace) -> int:
    alpha = parse_angle(args.alpha)
    beta = parse_angle(args.beta) if args.beta is not None else None
    phi1, phi2 = parse_angle(args.phi1), parse_angle(args.phi2)
    family = Family(args.family)
    spec = EigenbasisSpec(family, alpha=alpha.value, beta=None if beta is None else beta.value,
                          phi1=phi1.value, phi2=phi2.value)
    table = verify.derive_map_table(spec)
    divergences = table.divergences()
    parameters = {"alpha": alpha}
    if family is Family.TWISTED_PRODUCT:
        parameters = {"alpha": AngleOutput(value=spec.alpha, symbolic="pi/2")}
    elif family is Family.NONMAX_GENERAL:
        parameters.update({"beta": beta or alpha, "phi1": phi1, "phi2": phi2})
    output = TableOutput(
        family=family.value,
        parameters=parameters,
        blocks=[
            TableBlockOutput(signature=signature, rows=[(index, f"{a}{b}") for index, (a, b) in rows],
                             divergences=divergences.get(signature, []))
            for signature, rows in table.blocks.items()
        ],
    )
    if args.format == "json":
        sys.stdout.write(output.model_dump_json(by_alias=True, indent=2) + "\n")
    else:
        sys.stdout.write(format_table(output))
    return EXIT_OK


# verify

def format_sweep_csv(rows: list[dict]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for row in rows:
        writer.writerow([
            repr(row[column]) if isinstance(row[column], float) else ("" if row[column] is None else row[column])
            for column in SWEEP_COLUMNS
        ])
    return buffer.getvalue()


def cmd_verify(args: argparse.Namespace) -> int:
    for name in ("alpha_steps", "n_max", "inputs"):
        value = getattr(args, name)
        if value is not None and value < 1:
            raise ParameterError(f"--{name.replace('_', '-')} must be positive")
    runner = VerificationSuiteRunner()
    if args.graph:
        sys.stdout.write(draw_graph(runner.graph) + "\n")
        return EXIT_OK
    result = runner.run(suites=args.suite or ["all"], random_inputs=args.inputs, seed=args.seed,
                        alpha_steps=args.alpha_steps, n_max=args.n_max)
    if args.format == "json":
        output = SuiteOutput(
            suites=result["completed_suites"],
            passed=result["passed"],
            reports=result["reports"],
            sweep=result["sweep_rows"],
            errors=result["errors"],
            node_history=result["node_history"],
        )
        sys.stdout.write(output.model_dump_json(by_alias=True, indent=2) + "\n")
    elif args.format == "csv":
        sys.stdout.write(format_sweep_csv(result["sweep_rows"]))
    else:
        sys.stdout.write(result["final_report"])
    if not result["passed"]:
        sys.stderr.write(result["final_report"] if args.format != "text" else "")
        return EXIT_FAILED
    return EXIT_OK


COMMANDS = {"run": cmd_run, "table": cmd_table, "verify": cmd_verify}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = create_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    configure_logging(True if args.debug else None)
    try:
        return COMMANDS[args.command](args)
    except (ParameterError, StructuralError, ResourceError, ValidationError) as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_USAGE
    except SimulationError as e:
        logger.error("%s: %s", type(e).__name__, e)
        sys.stderr.write(f"error: {e}\n")
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
