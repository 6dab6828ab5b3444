"""``multisens`` command line: analyze, bound, reduce, validate and demo.

Exit codes: 0 success, 2 configuration error, 3 numerical degeneracy,
4 acceptance-gate failure.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from typing import Optional

from .bounds import CouplingBoundReport
from .config import RunConfig, load_config, parse_config, plan_fragment
from .errors import ConfigurationError, MultisensError
from .pipeline import analyze, complete_plan, compute_bounds, macro_target, plan, resolve
from .reduction import ReductionPlan
from .report import read_json, run_validation, write_json, write_si_csv, write_validation
from .sobol import SensitivityResult

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_GATE = 0, 2, 3, 4

log = logging.getLogger("multisens")

DEMOS = {
    "reaction": dict(model={"name": "reaction"}, n=2 ** 15, seed=1, n_validate=10 ** 4, threshold=0.1,
                     eps=0.1, bins=50, trials=100, delta_n=4096,
                     gates={"max_rel_err_std": 0.05, "min_ks_p": 0.05, "min_levene_p": 0.05}),
    "ou": dict(model={"name": "ou"}, n=2 ** 14, seed=1, n_validate=2 * 10 ** 4, threshold=0.01,
               eps=0.1, bins=50, trials=50, delta_n=512,
               gates={"max_rel_err_std": 0.03, "min_ks_p": 0.05, "min_levene_p": 0.05}),
    "counterexample": dict(model={"name": "counterexample", "beta": 0.05}, n=2 ** 14, seed=1,
                           n_validate=10 ** 4, threshold=0.01, eps=0.1, bins=50, trials=50, delta_n=2048,
                           gates={"max_rel_err_std": 0.05, "min_ks_p": 0.05, "min_levene_p": 0.05}),
}


class GateFailure(Exception):
    pass


# ---------------------------------------------------------------- helpers

def _config(args) -> RunConfig:
    cfg = load_config(args.config)
    gates = {}
    for key in ("max_rel_err_std", "min_ks_p", "min_levene_p"):
        v = getattr(args, key, None)
        if v is not None:
            gates[key] = v
    return cfg.with_overrides(
        name=args.model, beta=args.beta, n=args.n, seed=args.seed, threshold=args.threshold, eps=args.eps,
        bins=args.bins, n_boot=args.n_boot, workers=args.workers, output_dir=args.output_dir,
        form=getattr(args, "form", None), L=getattr(args, "L", None), c=getattr(args, "c", None),
        g0=getattr(args, "g0", None), n_validate=getattr(args, "n_validate", None),
        trials=getattr(args, "trials", None), gates=gates)


def _out(cfg: RunConfig, *parts) -> str:
    return os.path.join(cfg.resolved_output_dir(), *parts)


def _si_payload(result: SensitivityResult, cfg: RunConfig, model: str) -> dict:
    d = result.to_dict()
    d.update({"model": model, "config_hash": cfg.hash()})
    return d


def _load_si(path: str) -> SensitivityResult:
    return SensitivityResult.from_dict(read_json(path))


def _load_plan(path: str) -> ReductionPlan:
    if path.endswith(".json"):
        return ReductionPlan.from_dict(read_json(path))
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = parse_config(fh.read(), source=path)
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc.strerror}") from None
    if cfg.plan is None:
        raise ConfigurationError(f"{path} has no [plan] section")
    return cfg.plan


def _macro_indices(cfg: RunConfig, args) -> SensitivityResult:
    if getattr(args, "si", None):
        return _load_si(args.si)
    cfg.require("n", "seed")
    return analyze(macro_target(resolve(cfg)), cfg.n, cfg.seed, n_boot=cfg.n_boot, workers=cfg.workers)


def _bounds_for(cfg: RunConfig, args) -> CouplingBoundReport:
    cfg.require("n", "seed")
    target = resolve(cfg)
    sf = _macro_indices(cfg, args)
    return compute_bounds(target.problem, sf, cfg.n, cfg.seed, n_boot=cfg.n_boot, workers=cfg.workers)


def _warn_uncertified(report: CouplingBoundReport):
    if not report.certified:
        failed = [c.name for c in report.conditions if not c.satisfied]
        log.warning("no certified upper bound; failed conditions: %s", ", ".join(failed) or "none")


# ---------------------------------------------------------------- commands

def cmd_analyze(args) -> int:
    cfg = _config(args).require("n", "seed")
    target = resolve(cfg)
    result = analyze(target, cfg.n, cfg.seed, n_boot=cfg.n_boot, workers=cfg.workers)
    write_json(_out(cfg, "si.json"), _si_payload(result, cfg, cfg.model_name))
    write_si_csv(_out(cfg, "si.csv"), result)
    for r in result.inputs:
        print(f"{r.name}\t{r.s_total:.6g}\t[{r.ci_lo:.6g}, {r.ci_hi:.6g}]{'  flagged' if r.flagged else ''}")
    return EXIT_OK


def cmd_bound(args) -> int:
    cfg = _config(args)
    report = _bounds_for(cfg, args)
    write_json(_out(cfg, "bounds.json"), report.to_dict())
    _warn_uncertified(report)
    print(f"form={report.form.name} factor={report.factor!r} certified={report.certified}")
    return EXIT_OK


def cmd_reduce(args) -> int:
    cfg = _config(args)
    if cfg.threshold is None:
        raise ConfigurationError("reduce needs an explicit threshold (--threshold or [run] threshold)")
    target = resolve(cfg)
    if args.single_scale:
        p = plan(target.problem, cfg.threshold, sf=_macro_indices(cfg, args))
    else:
        if args.bounds:
            report = CouplingBoundReport.from_dict(read_json(args.bounds))
        else:
            report = _bounds_for(cfg, args)
        _warn_uncertified(report)
        p = plan(target.problem, cfg.threshold, bounds=report)
    write_json(_out(cfg, "plan.json"), p.to_dict())
    with open(_out(cfg, "plan.ini"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(plan_fragment(p))
    print(f"fixed: {', '.join(p.fixed_names) or '(none)'}; kept: {', '.join(p.kept)}")
    return EXIT_OK


def _validate(cfg: RunConfig, p: ReductionPlan, out_dir: str, extra: Optional[dict] = None) -> int:
    target = resolve(cfg)
    p = complete_plan(p, target.problem.space)
    n = cfg.n_validate if cfg.n_validate is not None else cfg.n
    meta = {"config_hash": cfg.hash()}
    report = run_validation(target.problem, p, n, cfg.seed, bins=cfg.bins, gates=cfg.gates or None,
                            eps=cfg.eps, trials=cfg.trials, delta_n=cfg.delta_n, meta=meta)
    if extra:
        report.sensitivity = extra.get("sensitivity")
        report.bounds = extra.get("bounds")
    write_validation(out_dir, report)
    for g in report.gates:
        print(f"{'PASS' if g.passed else 'FAIL'} {g.name}: {g.value!r} (limit {g.limit!r})")
    if not report.passed:
        names = ", ".join(g.name for g in report.failed_gates)
        raise GateFailure(f"acceptance gate(s) failed: {names}")
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = _config(args).require("n", "seed")
    if args.plan:
        p = _load_plan(args.plan)
    elif cfg.plan is not None:
        p = cfg.plan
    else:
        raise ConfigurationError("validate needs a plan (--plan or a [plan] section)")
    return _validate(cfg, p, cfg.resolved_output_dir())


def cmd_demo(args) -> int:
    settings = DEMOS[args.name]
    cfg = RunConfig(**settings)
    if args.output_dir:
        cfg = cfg.with_overrides(output_dir=args.output_dir)
    out_dir = _out(cfg, args.name)
    target = resolve(cfg)
    problem = target.problem
    sf = analyze(macro_target(target), cfg.n, cfg.seed, n_boot=cfg.n_boot)
    write_json(os.path.join(out_dir, "si.json"), _si_payload(sf, cfg, f"{args.name}-f"))
    write_si_csv(os.path.join(out_dir, "si.csv"), sf)
    bounds = None
    if problem.form is not None:
        bounds = compute_bounds(problem, sf, cfg.n, cfg.seed, n_boot=cfg.n_boot)
        write_json(os.path.join(out_dir, "bounds.json"), bounds.to_dict())
        p = plan(problem, cfg.threshold, bounds=bounds)
    else:
        log.warning("%s has no transfer theorem; fixing inputs by single-scale indices only", args.name)
        p = plan(problem, cfg.threshold, sf=sf)
    write_json(os.path.join(out_dir, "plan.json"), p.to_dict())
    with open(os.path.join(out_dir, "plan.ini"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(plan_fragment(p))
    print(f"fixed: {', '.join(p.fixed_names) or '(none)'}")
    extra = {"sensitivity": sf.to_dict(), "bounds": bounds.to_dict() if bounds is not None else None}
    try:
        return _validate(cfg, p, out_dir, extra)
    except GateFailure as exc:
        if not p.certified:
            raise GateFailure(f"{exc}. Inputs were fixed by single-scale indices without a coupling "
                              f"certificate, and the coupled output does depend on them") from None
        raise


# ---------------------------------------------------------------- parser

def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="INI run configuration")
    p.add_argument("--model", help="model name (reaction, ou, counterexample, composed; -f/-h suffixes)")
    p.add_argument("--n", type=int, help="base sample size")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--beta", type=float, help="counterexample parameter")
    p.add_argument("--threshold", type=float, help="total-index cutoff for fixing inputs")
    p.add_argument("--eps", type=float)
    p.add_argument("--bins", type=int)
    p.add_argument("--n-boot", dest="n_boot", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--output-dir", dest="output_dir")


def _form_args(p):
    p.add_argument("--form", help="coupling form for composed models")
    p.add_argument("--L", dest="L", type=float)
    p.add_argument("--c", dest="c", type=float)
    p.add_argument("--g0", dest="g0", type=float)
    p.add_argument("--si", help="si.json of the macro component (computed when absent)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="multisens", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="total Sobol indices of a model")
    _common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("bound", help="transfer single-scale indices to the coupled model")
    _common(p)
    _form_args(p)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("reduce", help="build a reduction plan")
    _common(p)
    _form_args(p)
    p.add_argument("--bounds", help="bounds.json from a previous bound run")
    p.add_argument("--single-scale", action="store_true",
                   help="fix inputs by single-scale indices alone (uncertified)")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("validate", help="compare full and reduced uncertainty propagation")
    _common(p)
    p.add_argument("--plan", help="plan.json or a config file with a [plan] section")
    p.add_argument("--n-validate", dest="n_validate", type=int)
    p.add_argument("--trials", type=int, help="trials of the fixing-error check (0 disables)")
    p.add_argument("--max-rel-err-std", dest="max_rel_err_std", type=float)
    p.add_argument("--min-ks-p", dest="min_ks_p", type=float)
    p.add_argument("--min-levene-p", dest="min_levene_p", type=float)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("demo", help="run one experiment end to end with pinned seeds")
    p.add_argument("name", choices=sorted(DEMOS))
    p.add_argument("--output-dir", dest="output_dir")
    p.set_defaults(func=cmd_demo)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(format="multisens: warning: %(message)s", level=logging.WARNING)
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except GateFailure as exc:
        print(f"multisens: gate failure: {exc}", file=sys.stderr)
        return EXIT_GATE
    except ConfigurationError as exc:
        print(f"multisens: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MultisensError, FloatingPointError, OverflowError) as exc:
        print(f"multisens: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
