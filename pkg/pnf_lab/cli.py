"""Command-line entry point.

Results go to stdout (or ``--output``) as JSON or CSV; logs go to stderr.
Candidate numbers on the command line and in output are 1-based.

Exit codes: 0 success, 1 verification failure, 2 input error, 3 internal
error.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import sentry_sdk

from .analysis import (
    check_dominance,
    error_ratio,
    expected_error,
    lower_bound,
    noisy_max_comparison,
    worst_case_by_n,
    worst_case_maximize,
    worst_case_value,
)
from .errors import (
    EXIT_INTERNAL_ERROR,
    EXIT_OK,
    EXIT_VERIFICATION_FAILED,
    InvalidArgumentError,
    PnfError,
)
from .exact_dist import exact_pmf
from .logging_config import configure_logging, log_runtime_info
from .mechanisms import (
    draw_samples,
    sample_exponential,
    sample_exponential_rejection,
    sample_permute_and_flip,
    sample_report_noisy_max,
)
from .optimality import (
    build_lp,
    dual_feasibility_check,
    dual_solve,
    export_lp,
    golden_ratio_threshold,
    lattice_total_error,
    pareto_probe,
    solve_lp,
)
from .output import dump_json, open_output, write_csv
from .reports import CheckReport
from .runtime_config import resolve_config
from .scores import Mechanism, PrivacyParams, QualityScores, parse_scores
from .sentry_config import init_sentry
from .tasks import (
    DEFAULT_EPSILON_GRID,
    EXPERIMENT_HEADER,
    TASKS,
    budget_inflation,
    epsilon_for_target_error,
    load_histogram,
    scores_error,
    sweep_experiment,
    synthetic_power_law_histogram,
    task_scores,
)
from .verification import (
    verify_dominance_suite,
    verify_g_monotonicity,
    verify_oracles,
    verify_privacy_on_lattice,
    verify_recurrence_suite,
    verify_regularity,
)
from .version_info import read_app_version


logger = logging.getLogger(__name__)

DEFAULT_WORSTCASE_POINTS = 61
VERIFY_SUITES = (
    "privacy",
    "regularity",
    "recurrence",
    "oracles",
    "dominance",
    "dual",
    "g-monotonicity",
)
DEFAULT_TRIALS = {
    "regularity": 200,
    "recurrence": 100,
    "oracles": 500,
    "dominance": 1000,
    "g-monotonicity": 500,
}

# Options whose values may start with '-' (negative scores or grids).
_LIST_OPTIONS = ("--scores", "--grid", "--c-grid", "--eps-grid", "--n-sweep")


def _join_list_values(argv: Sequence[str]) -> List[str]:
    """Turn ``--scores -2,0`` into ``--scores=-2,0`` so argparse accepts it."""
    joined: List[str] = []
    tokens = list(argv)
    i = 0
    while i < len(tokens):
        token = tokens[i]
        if token in _LIST_OPTIONS and i + 1 < len(tokens) and tokens[i + 1].startswith("-"):
            joined.append(f"{token}={tokens[i + 1]}")
            i += 2
            continue
        joined.append(token)
        i += 1
    return joined


def _float_list(text: str) -> List[float]:
    values = []
    for token in text.replace(";", ",").split(","):
        token = token.strip()
        if not token:
            continue
        try:
            values.append(float(token))
        except ValueError:
            message = f"Invalid number {token!r} in list {text!r}"
            raise InvalidArgumentError(message) from None
    if not values:
        message = f"Empty list {text!r}"
        raise InvalidArgumentError(message)
    return values


def _int_list(text: str) -> List[int]:
    values = []
    for value in _float_list(text):
        if not value.is_integer():
            message = f"Expected integers, got {value} in {text!r}"
            raise InvalidArgumentError(message)
        values.append(int(value))
    return values


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--eps", type=float, dest="epsilon", help="Privacy budget ε (> 0)")
    common.add_argument("--delta", type=float, help="Sensitivity bound Δ (> 0)")
    common.add_argument(
        "--monotonic",
        action="store_true",
        default=None,
        dest="monotonic_quality",
        help="Quality function is monotonic (coins use ε/Δ)",
    )
    common.add_argument("--seed", type=int, help="Random seed (default: PNF_SEED or 0)")
    common.add_argument(
        "--format", choices=("json", "csv"), dest="output_format", help="Output format"
    )
    common.add_argument("--output", help="Write results to this file instead of stdout")
    common.add_argument("--config", help="YAML settings file")
    common.add_argument("--log-level", dest="log_level", help="Logging level, e.g. DEBUG")
    return common


def _add_scores_source(parser: argparse.ArgumentParser) -> None:
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--scores", help="Comma-separated quality scores")
    source.add_argument("--scores-file", help="File with one score per line")


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="pnf-lab",
        description="Permute-and-flip private selection: sampling and exact analysis",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {read_app_version()}")
    commands = parser.add_subparsers(dest="command", required=True)

    sample = commands.add_parser("sample", parents=[common], help="Draw private selections")
    _add_scores_source(sample)
    sample.add_argument("--mech", choices=[m.value for m in Mechanism], default="pf")
    sample.add_argument("--n", type=int, default=1, dest="count", help="Number of draws")
    sample.add_argument(
        "--sequential", action="store_true", help="Lazy without-replacement order (pf)"
    )
    sample.add_argument("--rejection", action="store_true", help="Rejection sampler (em)")
    sample.add_argument("--trace", action="store_true", help="Include a trace of the first draw")

    analyze = commands.add_parser("analyze", parents=[common], help="Exact pmfs and dominance")
    _add_scores_source(analyze)
    analyze.add_argument("--rnm", action="store_true", help="Include report-noisy-max")

    worstcase = commands.add_parser(
        "worstcase", parents=[common], help="Worst-case error curves and bounds"
    )
    worstcase.add_argument("--n", type=int, default=2, dest="candidates")
    worstcase.add_argument("--grid", help="Comma-separated coin probabilities in (0, 1]")
    worstcase.add_argument("--points", type=int, default=DEFAULT_WORSTCASE_POINTS)
    worstcase.add_argument("--n-sweep", help="Comma-separated candidate counts")
    worstcase.add_argument("--compare-rnm", action="store_true")
    worstcase.add_argument("--c-grid", help="Comma-separated score offsets c <= 0")

    optimality = commands.add_parser(
        "optimality", parents=[common], help="Linear-programming optimality report"
    )
    optimality.add_argument("--n", type=int, default=2, dest="candidates")
    optimality.add_argument("--k", type=int, default=1, dest="depth")
    optimality.add_argument("--form", choices=("relaxed", "full"), default="full")
    optimality.add_argument("--export-lp", help="Write the model in CPLEX LP format")
    optimality.add_argument(
        "--probe",
        help="Pareto probe target as LEVELS:LEVEL, e.g. 0,1,1:1",
    )

    experiment = commands.add_parser(
        "experiment", parents=[common], help="ε sweeps on histogram tasks"
    )
    data = experiment.add_mutually_exclusive_group(required=True)
    data.add_argument("--histogram", help="bin,count CSV file")
    data.add_argument("--synthetic", action="store_true", help="1024-bin power-law fixture")
    experiment.add_argument("--task", choices=TASKS, default="mode")
    experiment.add_argument("--eps-grid", help="Comma-separated ε values")
    experiment.add_argument("--mech", default="pf,em", help="Comma-separated mechanisms")
    experiment.add_argument("--budget-inflation", action="store_true")
    experiment.add_argument("--find-eps", action="store_true")
    experiment.add_argument("--target", type=float, help="Target expected error for --find-eps")

    verify = commands.add_parser("verify", parents=[common], help="Run a verification suite")
    verify.add_argument("suite", choices=VERIFY_SUITES)
    verify.add_argument("--trials", type=int)
    verify.add_argument("--n", type=int, default=3, dest="candidates")
    verify.add_argument("--k", type=int, default=3, dest="depth")
    verify.add_argument("--max-n", type=int, default=8)
    return parser


def _params(config: Dict[str, Any]) -> PrivacyParams:
    return PrivacyParams(config["epsilon"], config["delta"], config["monotonic_quality"])


def _load_scores(args: argparse.Namespace) -> QualityScores:
    if args.scores is not None:
        return parse_scores(args.scores)
    try:
        text = Path(args.scores_file).read_text(encoding="utf-8")
    except OSError as exc:
        message = f"Could not read scores file '{args.scores_file}'"
        raise InvalidArgumentError(message) from exc
    return parse_scores(text)


def _emit(
    args: argparse.Namespace,
    config: Dict[str, Any],
    payload: Any,
    header: Sequence[str],
    rows: Sequence[Sequence[Any]],
) -> None:
    with open_output(args.output) as stream:
        if config["output_format"] == "csv":
            write_csv(header, rows, stream)
        else:
            dump_json(payload, stream)


def _one_based(indices: Sequence[int]) -> List[int]:
    return [int(i) + 1 for i in indices]


def cmd_sample(args: argparse.Namespace, config: Dict[str, Any]) -> int:
    scores = _load_scores(args)
    params = _params(config)
    mechanism = Mechanism.parse(args.mech)
    if args.count < 0:
        message = f"Number of draws must be non-negative, got {args.count}"
        raise InvalidArgumentError(message)
    indices = draw_samples(
        scores,
        params,
        mechanism,
        args.count,
        config["seed"],
        sequential=args.sequential,
        rejection=args.rejection,
        max_iterations=config["rejection_max_iterations"],
    )
    dist = exact_pmf(mechanism, scores, params)
    payload: Dict[str, Any] = {
        "mechanism": mechanism.value,
        "epsilon": params.epsilon,
        "delta": params.delta,
        "seed": config["seed"],
        "count": args.count,
        "indices": _one_based(indices.tolist()),
        "pmf": dist.as_array(),
        "method": dist.method,
    }
    if args.trace:
        payload["trace"] = _trace(scores, params, mechanism, args, config)
    rows = [(i + 1, index) for i, index in enumerate(payload["indices"])]
    _emit(args, config, payload, ("draw", "index"), rows)
    return EXIT_OK


def _trace(
    scores: QualityScores,
    params: PrivacyParams,
    mechanism: Mechanism,
    args: argparse.Namespace,
    config: Dict[str, Any],
) -> Optional[Dict[str, Any]]:
    seed = config["seed"]
    if mechanism is Mechanism.PF:
        result = sample_permute_and_flip(
            scores, params, seed, sequential=args.sequential, trace=True
        )
    elif mechanism is Mechanism.EM and args.rejection:
        result = sample_exponential_rejection(
            scores, params, seed, max_iterations=config["rejection_max_iterations"], trace=True
        )
    elif mechanism is Mechanism.EM:
        result = sample_exponential(scores, params, seed)
    else:
        result = sample_report_noisy_max(scores, params, seed)
    if result.trace is None:
        return {"index": result.index + 1}
    return {
        "index": result.index + 1,
        "order": _one_based(result.trace.order),
        "coins": list(result.trace.coins),
    }


def cmd_analyze(args: argparse.Namespace, config: Dict[str, Any]) -> int:
    scores = _load_scores(args)
    params = _params(config)
    mechanisms = [Mechanism.EM, Mechanism.PF] + ([Mechanism.RNM] if args.rnm else [])
    dists = {m.value: exact_pmf(m, scores, params) for m in mechanisms}
    errors = {name: expected_error(dist, scores) for name, dist in dists.items()}
    dominance = check_dominance(scores, params)
    payload = {
        "scores": list(scores.values),
        "epsilon": params.epsilon,
        "delta": params.delta,
        "pmfs": {name: dist.as_array() for name, dist in dists.items()},
        "methods": {name: dist.method for name, dist in dists.items()},
        "expected_errors": errors,
        "ratio": error_ratio(errors["em"], errors["pf"]),
        "ccdf": [{"t": t, "pf": pf, "em": em} for t, pf, em in dominance.ccdf],
        "dominance": {"holds": dominance.holds, "max_violation": dominance.max_violation},
    }
    _emit(args, config, payload, ("t", "pf_ccdf", "em_ccdf"), dominance.ccdf)
    return EXIT_OK


def _worstcase_grid(args: argparse.Namespace) -> List[float]:
    if args.grid:
        return _float_list(args.grid)
    if args.points < 2:
        message = f"--points must be at least 2, got {args.points}"
        raise InvalidArgumentError(message)
    return [float(p) for p in np.logspace(-6.0, 0.0, args.points)]


def cmd_worstcase(args: argparse.Namespace, config: Dict[str, Any]) -> int:
    params = _params(config)
    if args.n_sweep:
        rows = worst_case_by_n(_int_list(args.n_sweep), params)
        table = [(r.n, r.em_worst, r.pf_worst, r.lower_bound, r.upper_bound) for r in rows]
        header = ("n", "em_worst", "pf_worst", "lower_bound", "upper_bound")
        _emit(args, config, {"rows": [dict(zip(header, row)) for row in table]}, header, table)
        return EXIT_OK

    n = args.candidates
    if n < 2:
        message = f"worstcase needs at least 2 candidates, got {n}"
        raise InvalidArgumentError(message)

    if args.compare_rnm:
        cs = _float_list(args.c_grid) if args.c_grid else [-0.5 * i for i in range(0, 21)]
        comparison = noisy_max_comparison(cs, n, params)
        table = [(r.c, r.em_error, r.pf_error, r.rnm_error) for r in comparison]
        header = ("c", "em_error", "pf_error", "rnm_error")
        _emit(args, config, {"rows": [dict(zip(header, row)) for row in table]}, header, table)
        return EXIT_OK

    def row(kind: str, p: float) -> tuple:
        em = worst_case_value(Mechanism.EM, p, n, params)
        pf = worst_case_value(Mechanism.PF, p, n, params)
        return (kind, p, em, pf, error_ratio(em, pf))

    table = [row("curve", p) for p in _worstcase_grid(args)]
    maximizers = {}
    for mechanism in (Mechanism.EM, Mechanism.PF):
        p_star, value = worst_case_maximize(mechanism, n, params)
        maximizers[mechanism.value] = {"p": p_star, "value": value}
        table.append(row(f"max-{mechanism.value}", p_star))
    bounds = lower_bound(n, params)
    table.append(row("bound", 1.0 / n))
    header = ("kind", "p", "em_error", "pf_error", "ratio")
    payload = {
        "n": n,
        "epsilon": params.epsilon,
        "delta": params.delta,
        "curve": [dict(zip(header[1:], r[1:])) for r in table if r[0] == "curve"],
        "maximizers": maximizers,
        "bound": {
            "p": 1.0 / n,
            "lower_bound": bounds.bound,
            "exact": bounds.exact,
            "upper_bound": bounds.upper_bound,
            "ratio_to_upper": bounds.ratio_to_upper,
            "holds": bounds.holds,
        },
    }
    _emit(args, config, payload, header, table)
    return EXIT_OK


def _parse_probe(text: str) -> tuple:
    levels_text, sep, level_text = text.partition(":")
    if not sep:
        message = f"Probe target must look like LEVELS:LEVEL, got {text!r}"
        raise InvalidArgumentError(message)
    return _int_list(levels_text), _int_list(level_text)[0]


def cmd_optimality(args: argparse.Namespace, config: Dict[str, Any]) -> int:
    params = _params(config)
    n, k = args.candidates, args.depth
    cap = config["lattice_cap"]
    model = build_lp(n, k, params, args.form, cap)
    if args.export_lp:
        Path(args.export_lp).write_text(export_lp(model), encoding="utf-8")
        logger.info("Wrote LP model to %s", args.export_lp)
    solution = solve_lp(model, config["simplex_max_iterations"])
    optimum = max(-solution.objective, 0.0)
    pf_total = lattice_total_error(Mechanism.PF, n, k, params, cap)
    em_total = lattice_total_error(Mechanism.EM, n, k, params, cap)
    dual = dual_solve(n, k, params, cap)
    dual_report = dual_feasibility_check(dual, n, k, params, solution.objective, cap)
    golden = golden_ratio_threshold(params.epsilon)
    payload: Dict[str, Any] = {
        "n": n,
        "k": k,
        "epsilon": params.epsilon,
        "delta": params.delta,
        "form": args.form,
        "variables": model.num_variables,
        "equality_rows": model.num_equalities,
        "privacy_rows": model.num_privacy_rows,
        "lp_optimum": solution.objective,
        "simplex_iterations": solution.iterations,
        "residuals": solution.residuals(),
        "pf_objective": -pf_total,
        "em_objective": -em_total,
        "pf_ratio": error_ratio(pf_total, optimum),
        "em_ratio": error_ratio(em_total, optimum),
        "dual": dual_report.to_dict(),
        "threshold": golden.to_dict(),
    }
    if args.probe:
        payload["probe"] = pareto_probe(
            n,
            k,
            params,
            _parse_probe(args.probe),
            max_iterations=config["simplex_max_iterations"],
        ).to_dict()
    header = ("n", "k", "epsilon", "lp_optimum", "pf_ratio", "em_ratio", "dual_passed")
    rows = [
        (
            n,
            k,
            params.epsilon,
            solution.objective,
            payload["pf_ratio"],
            payload["em_ratio"],
            dual_report.passed,
        )
    ]
    _emit(args, config, payload, header, rows)
    return EXIT_OK


def cmd_experiment(args: argparse.Namespace, config: Dict[str, Any]) -> int:
    histogram = (
        synthetic_power_law_histogram() if args.synthetic else load_histogram(args.histogram)
    )
    mechanisms = [Mechanism.parse(tag.strip()) for tag in args.mech.split(",") if tag.strip()]
    if args.find_eps:
        if args.target is None:
            message = "--find-eps needs --target"
            raise InvalidArgumentError(message)
        mechanism = mechanisms[-1]
        epsilon = epsilon_for_target_error(histogram, args.task, mechanism, args.target)
        achieved = scores_error(
            task_scores(histogram, args.task), mechanism, PrivacyParams(epsilon)
        )
        header = ("task", "mechanism", "target", "epsilon", "achieved_error")
        row = (args.task, mechanism.value, args.target, epsilon, achieved)
        _emit(args, config, dict(zip(header, row)), header, [row])
        return EXIT_OK

    epsilons = _float_list(args.eps_grid) if args.eps_grid else list(DEFAULT_EPSILON_GRID)
    rows = sweep_experiment(histogram, args.task, epsilons, mechanisms, config["workers"])
    header: Sequence[str] = EXPERIMENT_HEADER
    table = [row.as_tuple() for row in rows]
    records = [row.to_dict() for row in rows]
    if args.budget_inflation:
        inflation: Dict[tuple, float] = {}
        for row in rows:
            key = (row.epsilon, row.mechanism)
            if row.mechanism == Mechanism.PF.value:
                inflation[key] = 1.0
            else:
                inflation[key] = budget_inflation(
                    histogram, args.task, row.epsilon, Mechanism.PF, row.mechanism
                )
        header = (*EXPERIMENT_HEADER, "budget_inflation")
        table = [(*row.as_tuple(), inflation[(row.epsilon, row.mechanism)]) for row in rows]
        for record, row in zip(records, rows):
            record["budget_inflation"] = inflation[(row.epsilon, row.mechanism)]
    _emit(args, config, {"rows": records}, header, table)
    return EXIT_OK


def _run_suite(args: argparse.Namespace, config: Dict[str, Any]) -> CheckReport:
    params = _params(config)
    suite = args.suite
    trials = args.trials if args.trials is not None else DEFAULT_TRIALS.get(suite, 0)
    seed = config["seed"]
    if suite == "privacy":
        return verify_privacy_on_lattice(
            args.candidates, args.depth, params, config["lattice_cap"]
        )
    if suite == "regularity":
        return verify_regularity(params, trials, seed, max_n=args.max_n)
    if suite == "recurrence":
        return verify_recurrence_suite(trials, seed, args.candidates, args.depth, params)
    if suite == "oracles":
        return verify_oracles(trials, seed)
    if suite == "dominance":
        return verify_dominance_suite(trials, seed, max_n=args.max_n, delta=params.delta)
    if suite == "g-monotonicity":
        return verify_g_monotonicity(params, trials, seed, max_n=args.max_n)
    primal = solve_lp(
        build_lp(args.candidates, args.depth, params, cap=config["lattice_cap"]),
        config["simplex_max_iterations"],
    )
    dual = dual_solve(args.candidates, args.depth, params, config["lattice_cap"])
    return dual_feasibility_check(
        dual, args.candidates, args.depth, params, primal.objective, config["lattice_cap"]
    )


def cmd_verify(args: argparse.Namespace, config: Dict[str, Any]) -> int:
    report = _run_suite(args, config)
    row = (report.name, report.passed, report.max_violation, report.checked)
    _emit(args, config, report, ("name", "passed", "max_violation", "checked"), [row])
    if not report.passed:
        logger.warning(
            "Verification suite %s failed: max_violation=%.12g", report.name, report.max_violation
        )
        return EXIT_VERIFICATION_FAILED
    return EXIT_OK


COMMANDS: Dict[str, Callable[[argparse.Namespace, Dict[str, Any]], int]] = {
    "sample": cmd_sample,
    "analyze": cmd_analyze,
    "worstcase": cmd_worstcase,
    "optimality": cmd_optimality,
    "experiment": cmd_experiment,
    "verify": cmd_verify,
}


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    return {
        "epsilon": args.epsilon,
        "delta": args.delta,
        "monotonic_quality": args.monotonic_quality,
        "seed": args.seed,
        "output_format": args.output_format,
        "log_level": args.log_level,
    }


def _report_error(exc: BaseException, reporting: bool) -> None:
    if reporting:
        sentry_sdk.capture_exception(exc)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand and return its exit code."""
    configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(_join_list_values(sys.argv[1:] if argv is None else argv))
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_OK

    reporting = False
    try:
        config = resolve_config(_overrides(args), args.config)
        configure_logging(
            config["log_level"], config["log_format"], config["log_include_identifiers"]
        )
        reporting = init_sentry(config["sentry_dsn"])
        log_runtime_info()
        return COMMANDS[args.command](args, config)
    except PnfError as exc:
        detail = f"{exc.message} ({exc.hint})" if exc.hint else exc.message
        logger.error("%s failed: %s", args.command, detail)
        print(f"error: {detail}", file=sys.stderr)
        if exc.exit_code == EXIT_INTERNAL_ERROR:
            _report_error(exc, reporting)
        return exc.exit_code
    except Exception as exc:
        logger.exception("Unexpected error in %s", args.command)
        _report_error(exc, reporting)
        return EXIT_INTERNAL_ERROR


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
