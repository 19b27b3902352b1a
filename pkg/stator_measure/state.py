from typing import TypedDict, List, Dict, Any


class SuiteState(TypedDict):

    """State for a verification run"""
    # Selection
    requested_suites: List[str]
    pending_suites: List[str]
    completed_suites: List[str]
    current_suite: str

    # Parameters
    random_inputs: int
    seed: int
    alpha_steps: int
    n_max: int

    # Results
    reports: List[Dict[str, Any]]
    sweep_rows: List[Dict[str, Any]]
    suite_summaries: Dict[str, Dict[str, int]]

    # Final results
    passed: bool
    final_report: str

    # Control
    should_continue: bool
    stop_reason: str

    # Debugging & Monitoring
    processing_time: float
    node_history: List[str]

    # Error handling
    errors: List[str]
