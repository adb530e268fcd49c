from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from app.models.protocol import ProtocolKind, ProtocolParams
from app.services.adversary import ATTACKS


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


class SweepParameter(str, Enum):
    THETA = "theta"
    N = "n"
    DELTA = "delta"
    EPSILON = "epsilon"
    TRIALS = "trials"


CSV_COLUMNS = [
    'protocol', 'n', 'delta', 'epsilon', 'seed', 'status',
    'ctrl_err_z', 'ctrl_err_x', 'test_err', 'eve_info_flag',
]

SWEEP_COLUMNS = [
    'value', 'detection_prob', 'detection_ci_lo', 'detection_ci_hi',
    'eve_info', 'eve_info_ci_lo', 'eve_info_ci_hi',
]


class ExperimentConfig(BaseModel):
    protocol: ProtocolKind = ProtocolKind.P2
    params: ProtocolParams
    attack: str = "no_attack"
    attack_params: Dict[str, Any] = Field(default_factory=dict)
    trials: int = Field(1, ge=1)
    master_seed: int = 0
    output: Optional[str] = Field(None, description="Result file; the summary goes to <output>.summary.json")
    output_format: OutputFormat = OutputFormat.CSV

    @field_validator('attack')
    @classmethod
    def attack_must_exist(cls, v: str) -> str:
        key = v.strip().lower()
        if key == 'hamming_weight_attack':
            key = 'hamming_weight'
        if key not in ATTACKS:
            raise ValueError(f"unknown attack '{v}'; choose from {sorted(ATTACKS)}")
        return key

    @model_validator(mode='after')
    def sync_seed(self) -> "ExperimentConfig":
        if self.params.master_seed != self.master_seed:
            self.params = self.params.model_copy(update={'master_seed': self.master_seed})
        return self


class SweepConfig(BaseModel):
    base: ExperimentConfig
    swept_parameter: SweepParameter
    values: List[float] = Field(..., min_length=1)

    def config_for(self, value: float) -> ExperimentConfig:
        """The base experiment with the swept parameter set to `value`"""
        base = self.base
        if self.swept_parameter == SweepParameter.THETA:
            update = {'attack_params': dict(base.attack_params, theta=float(value))}
        elif self.swept_parameter == SweepParameter.TRIALS:
            update = {'trials': int(value)}
        else:
            name = self.swept_parameter.value
            typed = int(value) if self.swept_parameter == SweepParameter.N else float(value)
            params = ProtocolParams(**dict(base.params.model_dump(), **{name: typed}))
            update = {'params': params}
        return ExperimentConfig(**dict(base.model_dump(), output=None, **update))


class TrialRow(BaseModel):
    protocol: str
    n: int
    delta: float
    epsilon: float
    seed: int
    status: str
    ctrl_err_z: float
    ctrl_err_x: float
    test_err: Optional[float] = None
    eve_info_flag: int = 0


class ExperimentSummary(BaseModel):
    protocol: str
    attack: str
    attack_params: Dict[str, Any] = Field(default_factory=dict)
    n: int
    delta: float
    epsilon: float
    num_qubits: int
    master_seed: int
    trials: int
    completed: int
    aborted: int
    abort_rate: float
    abort_ci_lo: float
    abort_ci_hi: float
    threshold_abort_rate: float
    abort_reasons: Dict[str, int] = Field(default_factory=dict)
    mean_ctrl_err_z: float
    mean_ctrl_err_x: float
    mean_test_err: Optional[float] = None
    ctrl_x_bits: int
    detection_prob: float
    detection_ci_lo: float
    detection_ci_hi: float
    eve_info: Optional[float] = None
    eve_info_ci_lo: Optional[float] = None
    eve_info_ci_hi: Optional[float] = None
    eve_info_miller_madow: Optional[float] = None
    eve_info_samples: int = 0
    eve_guess_accuracy: Optional[float] = None
    expected_leak: Optional[float] = None
    mean_category_counts: Dict[str, float] = Field(default_factory=dict)
    output: Optional[str] = None


class SweepRow(BaseModel):
    value: float
    detection_prob: float
    detection_ci_lo: float
    detection_ci_hi: float
    eve_info: Optional[float] = None
    eve_info_ci_lo: Optional[float] = None
    eve_info_ci_hi: Optional[float] = None


# Request Models
class ExperimentRequest(BaseModel):
    protocol: ProtocolKind = ProtocolKind.P2
    n: int = Field(4, gt=0, description="INFO string length, even")
    delta: float = Field(0.5, gt=0.0)
    epsilon: float = Field(0.0, ge=0.0, le=1.0)
    schedule: str = "Parallel"
    bob_model: str = "immediate"
    attack: str = "no_attack"
    attack_params: Dict[str, Any] = Field(default_factory=dict)
    trials: int = Field(100, ge=1, le=100000)
    seed: int = 0

    def to_config(self) -> ExperimentConfig:
        params = ProtocolParams(n=self.n, delta=self.delta, epsilon=self.epsilon,
                                schedule=self.schedule, bob_model=self.bob_model)
        return ExperimentConfig(protocol=self.protocol, params=params, attack=self.attack,
                                attack_params=self.attack_params, trials=self.trials,
                                master_seed=self.seed)


class VerifyRequest(BaseModel):
    scope: str = Field("all", description="combinatorics, entropy, leakage, abort, hoeffding or all")


# Response Models
class JobStatus(str, Enum):
    queued = "queued"
    running = "running"
    completed = "completed"
    failed = "failed"


class ExperimentJob(BaseModel):
    experiment_id: str
    status: JobStatus
    summary: Optional[ExperimentSummary] = None
    error: Optional[str] = None


class VerifyResponse(BaseModel):
    scope: str
    exit_code: int
    passed: int
    failed: int
    skipped: int
    reports: List[Dict[str, Any]]
