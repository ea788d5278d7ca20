"""Command line: ``quenched-clt <subcommand> [--config FILE] [options]``.

Subcommands ``simulate``, ``variance``, ``limit``, ``positivity``, ``clt`` and
``run`` read an experiment config (see :mod:`quenched_clt.config`) and write
CSV tables plus ``manifest.json`` into the configured output directory.
``rates`` needs only the four exponents and ``audit`` needs nothing.

Exit status is 0 when every requested check passed, 1 when a check failed and
2 for invalid input.
"""
from __future__ import annotations

import argparse
import sys

from . import runner
from .config import load_config
from .errors import ConfigError, QuenchedError
from .limit_variance import compare_routes
from .quenched import variance_identity_report
from .rates import BoundModel

ROUTE_CHOICES = {"vk": ("vk",), "gk": ("gk",), "split": ("split",), "all": ("vk", "gk", "split")}


def _config(args):
    cfg = load_config(args.config)
    if args.workers is not None:
        cfg = cfg.with_workers(args.workers)
    if args.output is not None:
        cfg = cfg.with_output(args.output)
    return cfg


def _cmd_simulate(args) -> int:
    cfg = _config(args)
    out = runner.outputs_for(cfg)
    sec = runner.section_quenched(cfg, out)
    out.manifest()
    for n, m in zip(sec["schedule"], sec["mean_sigma_n_sq"]):
        print(f"n={n}  mean sigma_n^2={m:.6g}")
    if sec.get("fluctuation_slope") is not None:
        print(f"fluctuation decay slope: {sec['fluctuation_slope']:.3f}")
    return 0


def _cmd_variance(args) -> int:
    cfg = _config(args)
    n = cfg.schedule[-1]
    rep = variance_identity_report(cfg.system, cfg.process, cfg.observable, cfg.ensemble(), n,
                                   cfg.realizations, cfg.seed, cfg.workers)
    out = runner.outputs_for(cfg)
    out.csv("variance_identity.csv",
            ("n", "joint_variance", "centering_variance", "mean_sigma_n_sq", "residual"),
            [(rep.n, rep.total_variance, rep.centering_variance, rep.mean_quenched, rep.residual)])
    ok = abs(rep.residual) <= 1e-9
    out.sections["variance"] = {"n": n, "residual": rep.residual, "passed": ok}
    out.manifest()
    print(f"n={n}  Var(W_n)={rep.total_variance:.6g}  Var mu(W_n)={rep.centering_variance:.6g}  "
          f"E sigma_n^2={rep.mean_quenched:.6g}  residual={rep.residual:.2e}")
    return 0 if ok else 1


def _cmd_limit(args) -> int:
    cfg = _config(args)
    out = runner.outputs_for(cfg)
    sec = runner.section_limit(cfg, out, ROUTE_CHOICES[args.route])
    out.manifest()
    for route, value in sec["estimates"].items():
        print(f"{route:20s} sigma^2 = {value:.6g} +- {sec['standard_errors'][route]:.2g}")
    for route, why in sec["skipped"].items():
        print(f"{route:20s} skipped: {why}")
    if len(sec["estimates"]) > 1:
        print("routes consistent" if sec["consistent"] else "routes INCONSISTENT")
    return 0 if sec["consistent"] else 1


def _cmd_rates(args) -> int:
    if args.config is not None:
        cfg = _config(args)
        out = runner.outputs_for(cfg)
        sec = runner.section_rates(cfg, out)
        out.manifest({"bound_model": sec["bound_model"]})
        if not sec["rates"]:
            print(f"bound model unresolved: {sec['bound_model'].get('unresolved')}")
            return 1
        rows = list(sec["rates"].items())
    else:
        missing = [k for k in ("psi", "gamma") if getattr(args, k) is None]
        if missing:
            raise ConfigError("--" + missing[0], "required without --config")
        rows = runner.rate_rows(BoundModel.polynomial(args.psi, args.gamma, args.zeta, args.delta))
    print(rows[0][1])
    if args.verbose:
        for name, desc in rows[1:]:
            print(f"{name}: {desc}")
    return 0


def _cmd_positivity(args) -> int:
    cfg = _config(args)
    out = runner.outputs_for(cfg)
    sec = runner.section_positivity(cfg, out, args.psi)
    out.manifest()
    print(f"verdict: {sec['verdict']} ({sec['reason']})")
    return 0 if sec["verdict"] != "not-run" else 1


def _cmd_clt(args) -> int:
    cfg = _config(args)
    out = runner.outputs_for(cfg)
    sec = runner.section_clt(cfg, out, args.sigma_sq)
    out.manifest()
    if sec["degenerate"]:
        print("degenerate: no Gaussian limit to compare against")
        return 0
    print(f"final d_K = {sec['final_distance']:.4g}, min triangle residual = {sec['min_residual']:.2e}, "
          f"monotone within 1 se: {sec['monotone_within_1se']}")
    return 0 if sec["min_residual"] >= -1e-12 else 1


def _cmd_audit(args) -> int:
    checks = runner.audit()
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.detail}")
    return 0 if all(c.passed for c in checks) else 1


def _cmd_run(args) -> int:
    cfg = _config(args)
    manifest = runner.run(cfg)
    print(f"wrote {len(manifest['csv'])} tables and manifest.json to {cfg.output_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="quenched-clt", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def with_config(name, fn, help_text, required=True):
        s = sub.add_parser(name, help=help_text)
        s.add_argument("--config", required=required, help="experiment config file")
        s.add_argument("--workers", type=int, default=None, help="override [run] workers")
        s.add_argument("--output", default=None, help="override [run] output_dir")
        s.set_defaults(fn=fn)
        return s

    with_config("simulate", _cmd_simulate, "quenched variances and fluctuation decay")
    with_config("variance", _cmd_variance, "joint / centering / quenched variance identity")
    s = with_config("limit", _cmd_limit, "limit variance by one or all routes")
    s.add_argument("--route", choices=sorted(ROUTE_CHOICES), default="all")
    s = with_config("rates", _cmd_rates, "rate descriptions for a bound model", required=False)
    s.add_argument("--psi", type=float)
    s.add_argument("--gamma", type=float)
    s.add_argument("--zeta", type=float, default=2.0)
    s.add_argument("--delta", type=float, default=0.1)
    s.add_argument("--verbose", action="store_true", help="also print the component rates")
    s = with_config("positivity", _cmd_positivity, "classify growth of Var(S_n)")
    s.add_argument("--psi", type=float, default=None, help="decay exponent for the verdict")
    s = with_config("clt", _cmd_clt, "Kolmogorov distance triangle along the schedule")
    s.add_argument("--sigma-sq", dest="sigma_sq", type=float, default=None,
                   help="use this limit variance instead of estimating it")
    a = sub.add_parser("audit", help="golden tables, S(0,m) sandwich and exact identities")
    a.set_defaults(fn=_cmd_audit)
    with_config("run", _cmd_run, "every section plus the manifest")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except QuenchedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
