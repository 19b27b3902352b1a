from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class OracleReport(BaseModel):
    """
    This is the output structure for a single verification check.
    """
    model_config = ConfigDict(populate_by_name=True)

    quantity: str = Field(description="What was checked")
    expected: float = Field(description="Value the oracle predicts")
    observed: float = Field(description="Value the module under test produced")
    tolerance: float = Field(description="Largest accepted |expected - observed|")
    passed: bool = Field(alias="pass", description="|expected - observed| <= tolerance")

    @model_validator(mode="after")
    def _pass_matches_values(self):
        if self.passed != (abs(self.expected - self.observed) <= self.tolerance):
            raise ValueError(f"pass flag of {self.quantity!r} disagrees with its values")
        return self

    @classmethod
    def check(cls, quantity: str, expected: float, observed: float, tolerance: float) -> "OracleReport":
        expected, observed = float(expected), float(observed)
        return cls(quantity=quantity, expected=expected, observed=observed, tolerance=tolerance,
                   passed=abs(expected - observed) <= tolerance)


class AngleOutput(BaseModel):
    """
    This is the output structure for an angle given in radians or as a fraction of pi.
    """
    value: float = Field(description="Angle in radians")
    symbolic: Optional[str] = Field(default=None, description="Symbolic form such as pi/8, when given")


class RunConfig(BaseModel):
    """
    This is the validated configuration of a `run` invocation.
    """
    family: Literal["twisted-product", "general-product", "nonmax-equal", "nonmax-bell",
                    "nonmax-general", "twist-4x4"] = Field(description="Protocol family")
    alpha: AngleOutput = Field(description="Schmidt / twist angle alpha")
    beta: Optional[AngleOutput] = Field(default=None, description="Second angle of nonmax-general")
    phi1: AngleOutput = Field(description="Phase phi1 of nonmax-general")
    phi2: AngleOutput = Field(description="Phase phi2 of nonmax-general")
    u_axis: Literal["x", "y", "z"] = Field(default="y", description="Rotation axis of U_B")
    u_angle: AngleOutput = Field(description="Rotation angle of U_B")
    n_ebits: Optional[int] = Field(default=None, description="Ebit budget; family default when omitted")
    input: str = Field(description="eigen:k, a bitstring, or a comma-separated amplitude list")
    mode: Literal["enumerate", "sample"] = Field(default="enumerate", description="Branch enumeration or one sampled trajectory")
    seed: Optional[int] = Field(default=None, description="64-bit seed, sample mode only")
    format: Literal["text", "json", "csv"] = Field(default="text", description="Output format")

    @model_validator(mode="after")
    def _seed_for_sampling(self):
        if self.mode == "sample" and self.seed is None:
            raise ValueError("sample mode requires --seed")
        if self.seed is not None and not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must fit in 64 bits")
        return self


class RecordEntryOutput(BaseModel):
    label: str = Field(description="Measured observable")
    value: int = Field(description="+1 or -1")


class StateOutput(BaseModel):
    """
    This is the output structure for a post-measurement state.
    """
    model_config = ConfigDict(populate_by_name=True)

    qubits: list[str] = Field(alias="register", description="Qubit names, most significant first")
    amplitudes: list[tuple[float, float]] = Field(description="(real, imaginary) pairs")


class BranchOutput(BaseModel):
    """
    This is the output structure for one branch of a protocol run.
    """
    branch_id: int = Field(description="Position in the enumerated tree")
    probability: float = Field(description="Product of the Born probabilities along the branch")
    alice_record: list[RecordEntryOutput] = Field(description="Alice's outcome record")
    bob_record: list[RecordEntryOutput] = Field(description="Bob's outcome record")
    inferred: Optional[int] = Field(description="Eigenstate index, null on failure")
    post_state: StateOutput = Field(description="State of the system qubits after the protocol")


class RunOutput(BaseModel):
    """
    This is the output structure for the `run` command.
    """
    model_config = ConfigDict(populate_by_name=True)

    schema_version: int = Field(default=1, alias="schema", description="Output schema version")
    command: str = Field(default="run", description="CLI command")
    family: str = Field(description="Protocol family")
    parameters: dict[str, AngleOutput] = Field(description="Angles of the observable")
    u_axis: Optional[str] = Field(default=None, description="Rotation axis of U_B, twist-4x4 only")
    n_ebits: int = Field(description="Ebit budget")
    mode: str = Field(description="enumerate or sample")
    seed: Optional[int] = Field(default=None, description="Sampling seed")
    ebits_consumed: int = Field(description="Ebits prepared and used up")
    residual_entanglement: float = Field(description="Entanglement left between the system qubits")
    success_probability: float = Field(description="Total probability of non-failure branches")
    distribution: list[float] = Field(description="Outcome distribution conditioned on success")
    branches: list[BranchOutput] = Field(description="The branch tree")


class TableBlockOutput(BaseModel):
    signature: tuple[int, int] = Field(description="(v(sigma_z_a), v(sigma_x_b)) of the block")
    rows: list[tuple[int, str]] = Field(description="(eigenstate index, final |A B> bits)")
    divergences: list[str] = Field(default_factory=list, description="Differences from the reference table")


class TableOutput(BaseModel):
    """
    This is the output structure for the `table` command.
    """
    model_config = ConfigDict(populate_by_name=True)

    schema_version: int = Field(default=1, alias="schema")
    command: str = Field(default="table")
    family: str = Field(description="Protocol family")
    parameters: dict[str, AngleOutput] = Field(description="Angles used for the derivation")
    blocks: list[TableBlockOutput] = Field(description="One bijection per record signature")


class SweepRow(BaseModel):
    """
    This is the output structure for one cell of the success-probability sweep.
    """
    family: str = Field(description="Protocol family")
    alpha: float = Field(description="Angle in radians")
    alpha_label: str = Field(description="Angle as a fraction of pi")
    n: int = Field(description="Ebit budget of the run")
    stage_label: int = Field(description="Number of correction stages after the first, n - 1")
    enumerated: float = Field(description="Exact success probability from branch enumeration")
    loop_form: float = Field(description="1 - 2^-n, or 1 once the angle has closed")
    quoted_form: float = Field(description="1 - 1/2^(n-1)")
    closing_n: Optional[int] = Field(default=None, description="Smallest n at which the angle closes")


class SuiteOutput(BaseModel):
    """
    This is the output structure for the `verify` command.
    """
    model_config = ConfigDict(populate_by_name=True)

    schema_version: int = Field(default=1, alias="schema")
    command: str = Field(default="verify")
    suites: list[str] = Field(description="Suites that ran")
    passed: bool = Field(description="Every report passed and no suite raised")
    reports: list[OracleReport] = Field(description="All oracle reports")
    sweep: list[SweepRow] = Field(default_factory=list, description="Success sweep rows, when run")
    errors: list[str] = Field(default_factory=list, description="Exceptions raised by suites")
    node_history: list[str] = Field(default_factory=list, description="Graph nodes visited")
