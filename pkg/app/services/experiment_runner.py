import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Hashable, List, Optional, Tuple, Union

from dotenv import dotenv_values

from app.config import Config
from app.models.errors import ConfigurationError, InsufficientSamplesError
from app.models.experiment import (
    CSV_COLUMNS,
    SWEEP_COLUMNS,
    ExperimentConfig,
    ExperimentSummary,
    OutputFormat,
    SweepConfig,
    SweepRow,
    TrialRow,
)
from app.models.protocol import ProtocolKind
from app.services.adversary import get_attack
from app.services.bounds import expected_leak
from app.services.information import empirical_mi
from app.services.protocol_runner import get_runner
from app.utils.logger import setup_logger
from app.utils.rng import trial_rng, trial_seed
from app.utils.stats import wilson_interval

logger = setup_logger(__name__)

# Keys of a flat experiment file that belong to ProtocolParams
PARAM_KEYS = ('n', 'delta', 'epsilon', 'delta_prime', 'p_ctrl_threshold', 'p_test_threshold',
              'schedule', 'bob_model', 'mock_rounds')


@dataclass
class TrialResult:
    """What the parent process keeps from one trial"""
    row: TrialRow
    completed: bool
    abort_reason: Optional[str]
    threshold_abort: bool
    ctrl_bits_x: int
    ctrl_errors_x: int
    category_counts: Dict[str, int]
    alice_info: str = ""
    guesses: Optional[str] = None
    observable: Optional[Hashable] = None
    measured_count: Optional[int] = None


def run_trial(cfg: ExperimentConfig, trial_index: int) -> TrialResult:
    """One protocol run on the trial's own seeded stream"""
    rng = trial_rng(cfg.master_seed, trial_index)
    runner = get_runner(cfg.protocol)
    params = cfg.params
    num_qubits = runner.num_qubits(params)
    attack = get_attack(cfg.attack, num_qubits=num_qubits, **cfg.attack_params)
    outcome = runner.run(params, attack, rng)

    record = outcome.eve_record
    guesses = record.guesses if record is not None else None
    hit = int(outcome.completed and guesses is not None and guesses == outcome.alice_info)
    row = TrialRow(
        protocol=cfg.protocol.value,
        n=params.n,
        delta=params.delta,
        epsilon=params.epsilon,
        seed=trial_seed(cfg.master_seed, trial_index),
        status=outcome.status_label,
        ctrl_err_z=outcome.ctrl_err_z,
        ctrl_err_x=outcome.ctrl_err_x,
        test_err=outcome.test_err,
        eve_info_flag=hit,
    )
    return TrialResult(
        row=row,
        completed=outcome.completed,
        abort_reason=outcome.abort_reason.value if outcome.abort_reason else None,
        threshold_abort=outcome.threshold_abort,
        ctrl_bits_x=outcome.ctrl_bits_x,
        ctrl_errors_x=outcome.ctrl_errors_x,
        category_counts=outcome.category_counts,
        alice_info=outcome.alice_info,
        guesses=guesses,
        observable=record.observable() if record is not None else None,
        measured_count=record.metadata.get('measured_count') if record is not None else None,
    )


def _run_indexed(task: Tuple[ExperimentConfig, int]) -> TrialResult:
    return run_trial(*task)


class ExperimentRunner:
    """Runs experiments and sweeps, writes rows and summaries"""

    def __init__(self, workers: Optional[int] = None):
        self.logger = setup_logger(__name__)
        self.workers = max(1, Config.WORKERS if workers is None else workers)

    def run_trials(self, cfg: ExperimentConfig) -> List[TrialResult]:
        """Every trial of `cfg`, in trial-index order whatever the worker count"""
        # Fail fast on a bad attack before spawning workers
        get_attack(cfg.attack, num_qubits=get_runner(cfg.protocol).num_qubits(cfg.params), **cfg.attack_params)
        tasks = [(cfg, i) for i in range(cfg.trials)]
        if self.workers == 1 or cfg.trials == 1:
            return [_run_indexed(t) for t in tasks]
        chunk = max(1, cfg.trials // (4 * self.workers))
        with ProcessPoolExecutor(max_workers=self.workers) as executor:
            return list(executor.map(_run_indexed, tasks, chunksize=chunk))

    def summarize(self, cfg: ExperimentConfig, results: List[TrialResult]) -> ExperimentSummary:
        trials = len(results)
        completed = [r for r in results if r.completed]
        aborted = trials - len(completed)
        reasons: Dict[str, int] = {}
        for r in results:
            if r.abort_reason:
                reasons[r.abort_reason] = reasons.get(r.abort_reason, 0) + 1
        abort_lo, abort_hi = wilson_interval(aborted, trials)

        x_bits = sum(r.ctrl_bits_x for r in results)
        x_errors = sum(r.ctrl_errors_x for r in results)
        detection_lo, detection_hi = wilson_interval(x_errors, x_bits)

        test_errs = [r.row.test_err for r in results if r.row.test_err is not None]
        categories: Dict[str, float] = {}
        for r in results:
            for key, count in r.category_counts.items():
                categories[key] = categories.get(key, 0.0) + count / trials

        summary = ExperimentSummary(
            protocol=cfg.protocol.value,
            attack=cfg.attack,
            attack_params=cfg.attack_params,
            n=cfg.params.n,
            delta=cfg.params.delta,
            epsilon=cfg.params.epsilon,
            num_qubits=get_runner(cfg.protocol).num_qubits(cfg.params),
            master_seed=cfg.master_seed,
            trials=trials,
            completed=len(completed),
            aborted=aborted,
            abort_rate=aborted / trials,
            abort_ci_lo=abort_lo,
            abort_ci_hi=abort_hi,
            threshold_abort_rate=sum(r.threshold_abort for r in results) / trials,
            abort_reasons=reasons,
            mean_ctrl_err_z=sum(r.row.ctrl_err_z for r in results) / trials,
            mean_ctrl_err_x=sum(r.row.ctrl_err_x for r in results) / trials,
            mean_test_err=sum(test_errs) / len(test_errs) if test_errs else None,
            ctrl_x_bits=x_bits,
            detection_prob=x_errors / x_bits if x_bits else 0.0,
            detection_ci_lo=detection_lo,
            detection_ci_hi=detection_hi,
            mean_category_counts=categories,
            output=cfg.output,
        )
        self._eve_information(summary, cfg, completed)
        return summary

    def _eve_information(self, summary: ExperimentSummary, cfg: ExperimentConfig,
                         completed: List[TrialResult]) -> None:
        if not completed:
            return
        with_guesses = [r for r in completed if r.guesses is not None]
        if with_guesses:
            summary.eve_guess_accuracy = sum(r.guesses == r.alice_info for r in with_guesses) / len(with_guesses)
            pairs = [(g, a) for r in with_guesses for g, a in zip(r.guesses, r.alice_info)]
        else:
            pairs = [(r.observable, r.alice_info) for r in completed]

        measured = [r.measured_count for r in completed if r.measured_count is not None]
        if measured:
            summary.expected_leak = expected_leak(cfg.params.n, measured)

        try:
            estimate = empirical_mi(pairs, seed=cfg.master_seed)
        except InsufficientSamplesError as e:
            self.logger.warning(f"No Eve information estimate for {cfg.attack}: {str(e)}")
            return
        summary.eve_info = estimate.plug_in
        summary.eve_info_ci_lo = estimate.ci_low
        summary.eve_info_ci_hi = estimate.ci_high
        summary.eve_info_miller_madow = estimate.miller_madow
        summary.eve_info_samples = estimate.samples

    def run_experiment(self, cfg: ExperimentConfig) -> ExperimentSummary:
        self.logger.info(
            f"Running {cfg.trials} trials of {cfg.protocol.value} against {cfg.attack} "
            f"(n={cfg.params.n}, delta={cfg.params.delta}, epsilon={cfg.params.epsilon}, seed={cfg.master_seed})"
        )
        results = self.run_trials(cfg)
        summary = self.summarize(cfg, results)
        if cfg.output:
            write_rows(cfg.output, [r.row for r in results], cfg.output_format)
            write_summary(cfg.output, summary)
        self.logger.info(
            f"{summary.completed}/{summary.trials} completed, abort rate {summary.abort_rate:.4f}, "
            f"detection {summary.detection_prob:.4f}, eve info {summary.eve_info}"
        )
        return summary

    def run_sweep(self, cfg: SweepConfig, output: Optional[str] = None) -> List[SweepRow]:
        rows: List[SweepRow] = []
        for value in cfg.values:
            summary = self.run_experiment(cfg.config_for(value))
            rows.append(SweepRow(
                value=value,
                detection_prob=summary.detection_prob,
                detection_ci_lo=summary.detection_ci_lo,
                detection_ci_hi=summary.detection_ci_hi,
                eve_info=summary.eve_info,
                eve_info_ci_lo=summary.eve_info_ci_lo,
                eve_info_ci_hi=summary.eve_info_ci_hi,
            ))
        output = output or cfg.base.output
        if output:
            write_sweep(output, rows)
        return rows


def _prepare(path: Union[str, Path]) -> Path:
    """Relative paths land under Config.OUTPUT_DIR"""
    path = Path(path)
    if not path.is_absolute():
        path = Path(Config.OUTPUT_DIR) / path
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _csv_value(value: Any) -> Any:
    return "" if value is None else value


def write_rows(path: Union[str, Path], rows: List[TrialRow], fmt: OutputFormat = OutputFormat.CSV) -> Path:
    path = _prepare(path)
    records = [row.model_dump() for row in rows]
    try:
        with open(path, 'w', encoding='utf-8', newline='') as f:
            if OutputFormat(fmt) == OutputFormat.JSON:
                json.dump(records, f, indent=2)
                f.write('\n')
            else:
                w = csv.DictWriter(f, fieldnames=CSV_COLUMNS, lineterminator="\n")
                w.writeheader()
                for record in records:
                    w.writerow({k: _csv_value(record[k]) for k in CSV_COLUMNS})
    except OSError as e:
        logger.error(f"Failed to write results to {path}: {str(e)}")
        raise
    return path


def summary_path(output: Union[str, Path]) -> Path:
    return Path(f"{output}.summary.json")


def write_summary(output: Union[str, Path], summary: ExperimentSummary) -> Path:
    path = _prepare(summary_path(output))
    with open(path, 'w', encoding='utf-8') as f:
        f.write(summary.model_dump_json(indent=2))
        f.write('\n')
    return path


def write_sweep(path: Union[str, Path], rows: List[SweepRow]) -> Path:
    path = _prepare(path)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        w = csv.DictWriter(f, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _csv_value(v) for k, v in row.model_dump().items()})
    return path


def load_config_file(path: Union[str, Path]) -> Dict[str, str]:
    """Flat key=value file; blank values are dropped"""
    if not Path(path).is_file():
        raise ConfigurationError(f"config file {path} does not exist")
    return {k.strip().lower(): v for k, v in dotenv_values(path).items() if v not in (None, "")}


def build_experiment_config(values: Dict[str, Any]) -> ExperimentConfig:
    """ExperimentConfig from flat values (file entries merged with CLI flags)"""
    values = {k: v for k, v in values.items() if v is not None}
    params = {k: values.pop(k) for k in PARAM_KEYS if k in values}
    attack_params = {}
    if 'theta' in values:
        attack_params['theta'] = float(values.pop('theta'))
    if 'attack_path' in values:
        attack_params['path'] = values.pop('attack_path')
    if 'seed' in values:
        values['master_seed'] = values.pop('seed')
    if 'out' in values:
        values['output'] = values.pop('out')
    if 'format' in values:
        values['output_format'] = values.pop('format')
    if 'n' not in params:
        raise ConfigurationError("experiment needs the INFO length n")
    config = {k: values[k] for k in ('protocol', 'attack', 'trials', 'master_seed', 'output', 'output_format')
              if k in values}
    return ExperimentConfig(params=params, attack_params=attack_params, **config)


def build_sweep_config(values: Dict[str, Any]) -> SweepConfig:
    values = dict(values)
    swept = values.pop('sweep', None) or values.pop('swept_parameter', None)
    raw = values.pop('values', None)
    if not swept or raw is None:
        raise ConfigurationError("a sweep needs 'sweep' (parameter name) and 'values' (comma separated)")
    if isinstance(raw, str):
        raw = [float(v) for v in raw.split(',') if v.strip()]
    return SweepConfig(base=build_experiment_config(values), swept_parameter=swept, values=raw)


def run_experiment(cfg: ExperimentConfig, workers: Optional[int] = None) -> ExperimentSummary:
    return ExperimentRunner(workers).run_experiment(cfg)


def run_sweep(cfg: SweepConfig, output: Optional[str] = None, workers: Optional[int] = None) -> List[SweepRow]:
    return ExperimentRunner(workers).run_sweep(cfg, output)


def protocol_choices() -> List[str]:
    return [p.value for p in ProtocolKind]
