RUN_HEADER_TEMPLATE = """
Family: {family}
Parameters: {parameters}
Ebits: {n_ebits} budgeted, {ebits_consumed} consumed
Residual entanglement of the system qubits: {residual_entanglement:.6f} ebits
Mode: {mode}
Success probability: {success_probability:.12f}
Distribution (conditioned on success): {distribution}
"""


BRANCH_ROW_TEMPLATE = """  [{branch_id}] p={probability:.12f} inferred={inferred}
      alice: {alice}
      bob:   {bob}"""


def _record(entries) -> str:
    return " ".join(f"{entry.label}={entry.value:+d}" for entry in entries) or "-"


def _parameters(parameters: dict) -> str:
    return ", ".join(
        f"{name}={angle.symbolic or f'{angle.value:.10g}'}" for name, angle in parameters.items()
    )


def format_run_report(output) -> str:
    """
    Format a RunOutput as plain text: header, then one block per branch.
    """
    header = RUN_HEADER_TEMPLATE.format(
        family=output.family,
        parameters=_parameters(output.parameters),
        n_ebits=output.n_ebits,
        ebits_consumed=output.ebits_consumed,
        residual_entanglement=output.residual_entanglement,
        mode=output.mode if output.seed is None else f"{output.mode} (seed {output.seed})",
        success_probability=output.success_probability,
        distribution=", ".join(f"{p:.12f}" for p in output.distribution),
    )
    rows = [
        BRANCH_ROW_TEMPLATE.format(
            branch_id=branch.branch_id,
            probability=branch.probability,
            inferred="Failure" if branch.inferred is None else branch.inferred,
            alice=_record(branch.alice_record),
            bob=_record(branch.bob_record),
        )
        for branch in output.branches
    ]
    return header.strip() + "\n\nBranches:\n" + "\n".join(rows) + "\n"


TABLE_BLOCK_TEMPLATE = """
Block v(sigma_z_a)={alice:+d}, v(sigma_x_b)={bob:+d}
{rows}{divergences}"""


def format_table(output) -> str:
    """
    Format a TableOutput: one bijection per record signature, with divergences
    from the reference table marked.
    """
    blocks = []
    for block in output.blocks:
        rows = "\n".join(f"  Psi{index} -> |{bits}>" for index, bits in block.rows)
        divergences = "".join(f"\n  ! {note}" for note in block.divergences)
        blocks.append(TABLE_BLOCK_TEMPLATE.format(
            alice=block.signature[0], bob=block.signature[1], rows=rows, divergences=divergences,
        ))
    header = f"Map table: {output.family} ({_parameters(output.parameters)})"
    return header + "\n" + "\n".join(blocks) + "\n"


SUITE_SUMMARY_TEMPLATE = """
Verification: {verdict}
Suites: {suites}
Checks: {checks} run, {failed} failed
"""


def format_suite_report(state: dict) -> str:
    """
    Format the SUITE_SUMMARY_TEMPLATE from a finished SuiteState, followed by
    the per-suite counts, failing reports and errors.
    """
    failed = [report for report in state["reports"] if not report["pass"]]
    verdict = "PASS" if state["passed"] else "FAIL"
    summary = SUITE_SUMMARY_TEMPLATE.format(
        verdict=verdict,
        suites=", ".join(state["completed_suites"]),
        checks=len(state["reports"]),
        failed=len(failed),
    ).strip()
    lines = [summary, ""]
    for suite, counts in state["suite_summaries"].items():
        lines.append(f"  {suite}: {counts['checks'] - counts['failed']}/{counts['checks']} passed")
    for report in failed:
        lines.append(
            f"  FAILED [{report['suite']}] {report['quantity']}: expected {report['expected']:.12g}, "
            f"observed {report['observed']:.12g}, tolerance {report['tolerance']:.1e}"
        )
    for error in state["errors"]:
        lines.append(f"  ERROR {error}")
    return "\n".join(lines) + "\n"
