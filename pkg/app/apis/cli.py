import argparse
import json
import sys
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from app.config import Config
from app.models.errors import SQKDError
from app.models.experiment import SweepParameter
from app.services import experiment_runner
from app.services.bounds import closed_forms
from app.services.verification import SCOPES, VerificationSuite, format_table, run_verify
from app.utils.logger import LEVELS, set_log_level, setup_logger

logger = setup_logger(__name__)

# argparse dest -> flat config key
FLAG_KEYS = {
    'protocol': 'protocol', 'n': 'n', 'delta': 'delta', 'epsilon': 'epsilon', 'delta_prime': 'delta_prime',
    'p_ctrl': 'p_ctrl_threshold', 'p_test': 'p_test_threshold', 'schedule': 'schedule',
    'bob_model': 'bob_model', 'mock_rounds': 'mock_rounds', 'attack': 'attack', 'theta': 'theta',
    'attack_path': 'attack_path', 'trials': 'trials', 'seed': 'seed', 'out': 'out', 'format': 'format',
}


def _experiment_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=str, help="Flat key=value file; flags override its entries")
    parser.add_argument("--protocol", choices=experiment_runner.protocol_choices(), help="Protocol to run")
    parser.add_argument("--n", type=int, help="INFO string length (even)")
    parser.add_argument("--delta", type=float, help="Qubit surplus; N = ceil(8n(1+delta))")
    parser.add_argument("--epsilon", type=float, help="Balance slack of Protocol 1'")
    parser.add_argument("--delta-prime", type=float, help="Intermediate constant of the abort analysis")
    parser.add_argument("--p-ctrl", type=float, help="CTRL error threshold")
    parser.add_argument("--p-test", type=float, help="TEST error threshold")
    parser.add_argument("--schedule", choices=["Parallel", "Sequential"], help="Protocol 2 attack schedule")
    parser.add_argument("--bob-model", choices=["immediate", "register"], help="Protocol 2 Bob simulation")
    parser.add_argument("--mock-rounds", type=int, help="Rounds of the mock protocol")
    parser.add_argument("--attack", type=str, help="Registered attack name")
    parser.add_argument("--theta", type=float, help="Rotation angle of rotation_probe")
    parser.add_argument("--attack-path", type=str, help="JSON matrix file for the 'matrix' attack")
    parser.add_argument("--trials", type=int, help="Number of trials")
    parser.add_argument("--seed", type=int, help="Master seed")
    parser.add_argument("--out", type=str, help="Result file")
    parser.add_argument("--format", choices=["csv", "json"], help="Result file format")
    parser.add_argument("--workers", type=int, help=f"Worker processes (default SQKD_WORKERS={Config.WORKERS})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sqkd", description="Semi-quantum key distribution lab")
    parser.add_argument("--log-level", choices=LEVELS, help=f"Override LOG_LEVEL={Config.LOG_LEVEL} for this run")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run seeded protocol trials against an attack")
    _experiment_flags(run)

    sweep = sub.add_parser("sweep", help="Repeat an experiment over values of one parameter")
    _experiment_flags(sweep)
    sweep.add_argument("--sweep", choices=[p.value for p in SweepParameter], help="Swept parameter")
    sweep.add_argument("--values", type=str, help="Comma separated values")

    bounds = sub.add_parser("bounds", help="Evaluate the closed forms at one parameter point")
    bounds.add_argument("--n", type=int, default=40)
    bounds.add_argument("--epsilon", type=float, default=0.5)
    bounds.add_argument("--delta", type=float, default=0.5)
    bounds.add_argument("--delta-prime", type=float, default=0.3)
    bounds.add_argument("--k", type=float, default=4.0, help="Qubits per INFO bit in the leakage bound")
    bounds.add_argument("--json", action="store_true", help="Print JSON instead of text")

    verify = sub.add_parser("verify", help="Run the verification battery")
    verify.add_argument("--scope", choices=list(SCOPES) + ["all"], default="all")
    verify.add_argument("--seed", type=int, default=0)
    verify.add_argument("--hoeffding-trials", type=int, default=10 ** 5)
    verify.add_argument("--abort-trials", type=int, default=2000)
    verify.add_argument("--json", action="store_true", help="Print JSON instead of a table")

    serve = sub.add_parser("serve", help="Start the HTTP API")
    serve.add_argument("--host", type=str, default=Config.API_HOST)
    serve.add_argument("--port", type=int, default=Config.API_PORT)
    return parser


def merged_values(args: argparse.Namespace) -> Dict[str, Any]:
    """File entries overridden by explicit flags"""
    values: Dict[str, Any] = experiment_runner.load_config_file(args.config) if args.config else {}
    for dest, key in FLAG_KEYS.items():
        flag = getattr(args, dest, None)
        if flag is not None:
            values[key] = flag
    for dest in ('sweep', 'values'):
        flag = getattr(args, dest, None)
        if flag is not None:
            values[dest] = flag
    return values


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = experiment_runner.build_experiment_config(merged_values(args))
    summary = experiment_runner.run_experiment(cfg, workers=args.workers)
    print(summary.model_dump_json(indent=2))
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    cfg = experiment_runner.build_sweep_config(merged_values(args))
    rows = experiment_runner.run_sweep(cfg, workers=args.workers)
    print(json.dumps([r.model_dump() for r in rows], indent=2))
    return 0


def _cmd_bounds(args: argparse.Namespace) -> int:
    values = closed_forms(args.n, args.epsilon, args.delta, args.delta_prime, args.k)
    if args.json:
        print(json.dumps(values, indent=2))
    else:
        width = max(len(name) for name in values)
        for name, value in values.items():
            shown = f"{value:.6g}" if isinstance(value, float) else str(value)
            print(f"{name.ljust(width)}  {shown}")
    return 0


def _cmd_verify(args: argparse.Namespace) -> int:
    suite = VerificationSuite(seed=args.seed, hoeffding_trials=args.hoeffding_trials,
                              abort_trials=args.abort_trials)
    code, reports = run_verify(args.scope, suite=suite)
    if args.json:
        print(json.dumps([r.to_dict() for r in reports], indent=2))
    else:
        print(format_table(reports))
    failed = sum(not r.satisfied for r in reports)
    logger.info(f"verify {args.scope}: {len(reports) - failed} passed, {failed} failed")
    return code


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from app.apis.lab_api import LabAPI

    logger.info("Starting SQKD lab API server...")
    level = args.log_level or Config.LOG_LEVEL
    uvicorn.run(LabAPI().get_app(), host=args.host, port=args.port, log_level=level.lower())
    return 0


COMMANDS = {
    'run': _cmd_run,
    'sweep': _cmd_sweep,
    'bounds': _cmd_bounds,
    'verify': _cmd_verify,
    'serve': _cmd_serve,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.log_level:
        set_log_level(args.log_level)
    try:
        return COMMANDS[args.command](args)
    except (SQKDError, ValidationError) as e:
        logger.error(f"{args.command} failed: {str(e)}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
