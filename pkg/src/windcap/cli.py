"""``windcap`` command line: commitment, alpha estimation, validation, sampling."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .admissibility import CrossCheckError, write_worst_case_csv
from .commitment import CommitmentSchedule, NonConclusiveSolve, UCInfeasibleError, solve_uc
from .estimator import (DEFAULT_EPS_ALPHA, DEFAULT_TIME_LIMIT, LOWER_BOUND_INFEASIBLE,
                        Pipeline, bisect, coverage_experiment, default_eps_f, monte_carlo_validate, save_json,
                        write_trace_csv)
from .model import CaseError, SystemCase, bundled_case_path, load_case
from .optkit import BackendError, available_backends, get_backend
from .uncertainty import (ALPHA_CAP, UncertaintyError, build_box, case_uncertainty,
                          contains_many, sample_scenarios, write_scenarios_csv)

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_NONCONCLUSIVE = 0, 1, 2, 3

log = logging.getLogger("windcap")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2, which this tool reserves for infeasible models
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _hours(text: str) -> list[int]:
    try:
        hs = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated hours, got {text!r}")
    if not hs or min(hs) < 1:
        raise argparse.ArgumentTypeError("hours are 1-based and must be positive")
    return hs


def _positive(kind):
    def conv(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid value {text!r}")
        if v <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v
    return conv


def _nonneg_float(text):
    v = float(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be nonnegative, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("case", help="case JSON file, or the name of a bundled case (case3, case39)")
    common.add_argument("-o", "--out", default=".", help="output directory (default: .)")
    common.add_argument("--solver", default=None,
                        help="solver backend (default: $WINDCAP_SOLVER or 'embedded')")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--hours", type=_hours, default=None,
                        help="restrict uncertain coordinates to these 1-based hours, e.g. 1,15")
    common.add_argument("--dump-model", action="store_true",
                        help="write the LP-format model of every MILP solved")
    common.add_argument("-v", "--verbose", action="store_true")

    est = _Parser(add_help=False)
    est.add_argument("--alpha-lo", type=float, default=0.0)
    est.add_argument("--alpha-hi", type=float, default=ALPHA_CAP)
    est.add_argument("--eps-alpha", type=_positive(float), default=DEFAULT_EPS_ALPHA)
    est.add_argument("--eps-f", type=_nonneg_float, default=None,
                     help="violation tolerance in MW (default 1e-6 * max(1, total load))")
    est.add_argument("--rho-bounds", choices=("interval", "lp"), default="interval")
    est.add_argument("--time-limit", type=_nonneg_float, default=DEFAULT_TIME_LIMIT,
                     help="seconds per corner MILP before the certified bounds take over "
                          f"(default {DEFAULT_TIME_LIMIT:g}; 0 = no limit)")

    sched = _Parser(add_help=False)
    sched.add_argument("--schedule", default=None,
                       help="schedule JSON (default: <out>/schedule.json)")

    mc = _Parser(add_help=False)
    mc.add_argument("--samples", type=int, default=2000)
    mc.add_argument("--workers", type=_positive(int), default=1)

    p = _Parser(prog="windcap",
                description="Guaranteed probability of full wind accommodation under a fixed commitment.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("uc", parents=[common], help="solve the unit commitment, write schedule.json")
    sub.add_parser("estimate", parents=[common, est, sched],
                   help="bisection for alpha0; writes estimate.json, trace.csv, worst_case.csv")
    v = sub.add_parser("validate", parents=[common, sched, mc],
                       help="Monte Carlo check of alpha0 against the primal feasibility check")
    v.add_argument("--alpha", type=float, default=None,
                   help="alpha0 to validate (default: read <out>/estimate.json)")
    c = sub.add_parser("coverage", parents=[common, mc],
                       help="fraction of normal samples falling in the box, repeated")
    c.add_argument("--alpha", type=float, required=True)
    c.add_argument("--reps", type=_positive(int), default=100)
    s = sub.add_parser("sample", parents=[common], help="write correlated wind scenarios as CSV")
    s.add_argument("--samples", type=int, default=100)
    f = sub.add_parser("fullrun", parents=[common, est, mc],
                       help="uc, estimate and validate in sequence")
    f.add_argument("--schedule", default=None, help=argparse.SUPPRESS)
    return p


def _resolve_case(ref: str) -> SystemCase:
    path = Path(ref)
    if not path.exists() and not path.suffix:
        try:
            path = bundled_case_path(ref)
        except (FileNotFoundError, KeyError, ValueError):
            pass
    return load_case(path)


def _model(case: SystemCase, args):
    hours = None
    if args.hours is not None:
        if max(args.hours) > case.horizon:
            raise UsageError(f"--hours beyond the horizon ({case.horizon})")
        hours = [h - 1 for h in args.hours]
    return case_uncertainty(case, hours)


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _schedule(args, out: Path) -> CommitmentSchedule:
    path = Path(args.schedule) if args.schedule else out / "schedule.json"
    if not path.exists():
        raise UsageError(f"schedule not found: {path} (run `windcap uc` first or pass --schedule)")
    return CommitmentSchedule.load(path)


def run_uc(case, args, out: Path) -> CommitmentSchedule:
    dump = str(out / "uc.lp") if args.dump_model else None
    s = solve_uc(case, backend=args.solver, dump_model=dump)
    s.save(out / "schedule.json")
    print(f"UC objective: {s.objective:.6f}")
    print(s.table(case))
    return s


def run_estimate(case, sched, args, out: Path) -> int:
    if not 0.0 <= args.alpha_lo < args.alpha_hi <= 1.0:
        raise UsageError("need 0 <= --alpha-lo < --alpha-hi <= 1")
    model = _model(case, args)
    eps_f = default_eps_f(case) if args.eps_f is None else args.eps_f
    pipe = Pipeline(case, sched, model, backend=args.solver, rho_method=args.rho_bounds,
                    time_limit=args.time_limit or None)
    calls = iter(range(1, 10_000))

    def fw(alpha):
        dump = str(out / f"ck_milp_{next(calls):02d}.lp") if args.dump_model else None
        return pipe.fw(alpha, dump_model=dump)

    try:
        res = bisect(fw, args.eps_alpha, eps_f, args.alpha_lo, args.alpha_hi)
    except NonConclusiveSolve as exc:
        partial = exc.partial
        if partial is not None:
            save_json(out / "estimate.json", {**partial.to_dict(), "aborted": str(exc)})
            write_trace_csv(out / "trace.csv", partial)
        print(f"estimation aborted: {exc}", file=sys.stderr)
        return EXIT_NONCONCLUSIVE
    save_json(out / "estimate.json", res.to_dict())
    write_trace_csv(out / "trace.csv", res)
    if res.worst_case is not None:
        write_worst_case_csv(out / "worst_case.csv", model, res.worst_case)
    print(f"alpha0 = {100 * res.alpha0:.4f}%  ({res.iterations} iterations, {res.wall_time:.2f} s)")
    if res.flags:
        print("flags: " + ", ".join(res.flags))
    if LOWER_BOUND_INFEASIBLE in res.flags:
        print("the forecast itself cannot be fully accommodated", file=sys.stderr)
    return EXIT_OK


def run_validate(case, sched, args, out: Path, alpha0: float) -> int:
    if args.samples < 1:
        raise UsageError("--samples must be >= 1")
    model = _model(case, args)
    rep = monte_carlo_validate(case, sched, model, alpha0, args.samples, args.seed,
                               backend=args.solver, workers=args.workers)
    save_json(out / "validation.json", rep.to_dict())
    print(f"feasible fraction {rep.feasible_fraction:.4f}, coverage of box({alpha0:.6g}) "
          f"{rep.coverage_fraction:.4f}, SE {rep.standard_error:.4f}, "
          f"bound {'holds' if rep.bound_holds and rep.alpha_bound_holds else 'VIOLATED'}")
    return EXIT_OK


def cmd_uc(case, args) -> int:
    run_uc(case, args, _out(args))
    return EXIT_OK


def cmd_estimate(case, args) -> int:
    out = _out(args)
    sched = _schedule(args, out) if args.schedule or (out / "schedule.json").exists() \
        else run_uc(case, args, out)
    return run_estimate(case, sched, args, out)


def cmd_validate(case, args) -> int:
    out = _out(args)
    sched = _schedule(args, out)
    alpha0 = args.alpha
    if alpha0 is None:
        est = out / "estimate.json"
        if not est.exists():
            raise UsageError("no --alpha given and no estimate.json in the output directory")
        alpha0 = float(json.loads(est.read_text())["alpha0"])
    if not 0.0 <= alpha0 <= ALPHA_CAP:
        raise UsageError(f"alpha must lie in [0, {ALPHA_CAP}]")
    return run_validate(case, sched, args, out, alpha0)


def cmd_coverage(case, args) -> int:
    if args.samples < 1:
        raise UsageError("--samples must be >= 1")
    if not 0.0 <= args.alpha <= ALPHA_CAP:
        raise UsageError(f"--alpha must lie in [0, {ALPHA_CAP}]")
    out = _out(args)
    model = _model(case, args)
    stats = coverage_experiment(model, args.alpha, args.samples, args.reps, args.seed)
    stats["labels"] = model.labels
    save_json(out / "coverage.json", stats)
    # scatter of the first repetition, with the membership flag for plotting
    pts = sample_scenarios(model, args.samples, args.seed)
    inside = contains_many(build_box(model, args.alpha), model, pts, tol=1e-9)
    with open(out / "coverage_scatter.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(model.labels + ["inside"])
        for row, ins in zip(pts, inside):
            wr.writerow([repr(float(x)) for x in row] + [int(ins)])
    print(f"coverage at alpha={args.alpha}: mean {stats['mean']:.4f}, std {stats['std']:.4f} "
          f"over {args.reps} x {args.samples} samples")
    return EXIT_OK


def cmd_sample(case, args) -> int:
    if args.samples < 1:
        raise UsageError("--samples must be >= 1")
    out = _out(args)
    model = _model(case, args)
    write_scenarios_csv(out / "scenarios.csv", model, sample_scenarios(model, args.samples, args.seed))
    print(f"wrote {args.samples} scenarios of dimension {model.m} to {out / 'scenarios.csv'}")
    return EXIT_OK


def cmd_fullrun(case, args) -> int:
    if args.samples < 1:
        raise UsageError("--samples must be >= 1")
    out = _out(args)
    sched = run_uc(case, args, out)
    code = run_estimate(case, sched, args, out)
    if code != EXIT_OK:
        return code
    alpha0 = float(json.loads((out / "estimate.json").read_text())["alpha0"])
    return run_validate(case, sched, args, out, alpha0)


COMMANDS = {"uc": cmd_uc, "estimate": cmd_estimate, "validate": cmd_validate,
            "coverage": cmd_coverage, "sample": cmd_sample, "fullrun": cmd_fullrun}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        get_backend(args.solver)
    except BackendError:
        parser.error(f"unknown solver {args.solver!r}; available: {', '.join(available_backends())}")
    try:
        case = _resolve_case(args.case)
        return COMMANDS[args.command](case, args)
    except (UsageError, CaseError, UncertaintyError, OSError, ValueError) as exc:
        print(f"windcap: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except UCInfeasibleError as exc:
        print(f"windcap: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (NonConclusiveSolve, CrossCheckError) as exc:
        print(f"windcap: non-conclusive: {exc}", file=sys.stderr)
        return EXIT_NONCONCLUSIVE


if __name__ == "__main__":
    sys.exit(main())
