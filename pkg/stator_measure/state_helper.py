from typing import Dict, Any, Iterable, List

from errors import StructuralError
from structure_outputs import OracleReport, SweepRow

SUITES = (
    "stator",
    "eigen-certainty",
    "born",
    "no-signaling",
    "success-sweep",
    "tables",
    "reductions",
    "negative-control",
    "locality",
)


def resolve_suites(selector: Iterable[str]) -> List[str]:
    """Expand 'all' and check names; order follows SUITES."""
    wanted = set()
    for name in selector:
        if name == "all":
            wanted.update(SUITES)
        elif name in SUITES:
            wanted.add(name)
        else:
            raise StructuralError(f"unknown suite {name!r}; choose from {', '.join(SUITES)} or all")
    return [suite for suite in SUITES if suite in wanted]


# Helper functions for state management
def add_reports(state: Dict[str, Any], suite: str, reports: List[OracleReport]) -> Dict[str, Any]:
    """Add a suite's reports to the state"""
    state["reports"].extend(report.model_dump(by_alias=True) | {"suite": suite} for report in reports)
    failed = sum(1 for report in reports if not report.passed)
    state["suite_summaries"][suite] = {"checks": len(reports), "failed": failed}
    return state


def add_sweep_rows(state: Dict[str, Any], rows: List[SweepRow]) -> Dict[str, Any]:
    state["sweep_rows"].extend(row.model_dump() for row in rows)
    return state


def complete_suite(state: Dict[str, Any], suite: str) -> Dict[str, Any]:
    """Move the suite from pending to completed"""
    if suite in state["pending_suites"]:
        state["pending_suites"].remove(suite)
    state["completed_suites"].append(suite)
    return state


def should_continue_suites(state: Dict[str, Any]) -> bool:
    """Determine if another suite should run"""
    if not state["pending_suites"]:
        state["stop_reason"] = "all_suites_completed"
        return False
    return True


def failed_reports(state: Dict[str, Any]) -> List[Dict[str, Any]]:
    return [report for report in state["reports"] if not report["pass"]]


def overall_verdict(state: Dict[str, Any]) -> bool:
    """Every report passed and no suite raised"""
    return not state["errors"] and not failed_reports(state)
