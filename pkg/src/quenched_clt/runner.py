"""Experiment sections and the audit suite behind the command line.

Each section takes an :class:`ExperimentConfig`, writes its CSV tables into
``config.output_dir`` and returns a plain dict for the manifest.  Every random
quantity is keyed by ``(seed, realization, stream)`` and every parallel map
returns results in task order, so the files do not depend on ``workers``.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .clt import covariance_by_polarization, direct_covariance, triangle_report
from .config import ExperimentConfig
from .errors import DataError, ParameterError, UnsupportedError
from .io import write_csv, write_manifest
from .limit_variance import (DoubledEnsemble, LimitVarianceEstimate, classical_green_kubo_split,
                             compare_routes, green_kubo_doubled, growth_data, positivity_check,
                             sigma_sq_series, z_variance)
from .maps import Ensemble, MapSystem
from .observables import Cosine, Sine, Stacked
from .quenched import (_exact_mean, _sigma_task, correlation_table, fit_eta, fluctuation_decay,
                       quenched_variance, sigma_path, variance_identity_report)
from .rates import (BoundModel, PowerLaw, fluctuation_rate, h_zeta_rate, load_golden, main_rate,
                    mean_convergence_rate, sandwich_audit, variance_mean_gap_rate)
from .rng import map_ordered
from .selection import SelectionProcess, mixing_profile, sample_omega

# used when the data cannot pin an exponent down (correlations or mixing
# coefficients below the noise floor); both sit in the fast-decay regime
FALLBACK_PSI = 3.0
FALLBACK_GAMMA = 3.0


@dataclass
class Outputs:
    """CSV files written so far plus manifest sections."""

    directory: str
    config_hash: str
    files: list = field(default_factory=list)
    sections: dict = field(default_factory=dict)
    estimates: list = field(default_factory=list)

    def csv(self, name: str, columns, rows) -> None:
        write_csv(os.path.join(self.directory, name), columns, rows, self.config_hash)
        if name not in self.files:
            self.files.append(name)

    def manifest(self, extra: Optional[dict] = None) -> str:
        body = {"config_hash": self.config_hash, "csv": sorted(self.files), "sections": self.sections}
        body.update(extra or {})
        return write_manifest(os.path.join(self.directory, "manifest.json"), body)


def outputs_for(config: ExperimentConfig) -> Outputs:
    return Outputs(config.output_dir, config.config_hash)


# --------------------------------------------------------------------------
# quenched statistics
# --------------------------------------------------------------------------

def section_quenched(config: ExperimentConfig, out: Outputs) -> dict:
    sysm, proc, obs = config.system, config.process, config.observable
    ens = config.ensemble()
    sched = list(config.schedule)
    tasks = [(sysm, proc, obs, ens, sched, config.seed, r, None) for r in range(config.realizations)]
    table = np.stack(map_ordered(_sigma_task, tasks, config.workers))
    out.csv("quenched_sigma.csv", ("realization", "n", "sigma_n_sq"),
            [(r, n, table[r, c]) for r in range(table.shape[0]) for c, n in enumerate(sched)])
    summary = []
    for c, n in enumerate(sched):
        col = table[:, c]
        mean = _exact_mean(col)
        se = float(np.std(col, ddof=1) / math.sqrt(len(col))) if len(col) > 1 else math.nan
        q10, q50, q90 = np.quantile(np.abs(col - mean), (0.1, 0.5, 0.9))
        summary.append((n, mean, se, q10, q50, q90))
    out.csv("quenched_summary.csv", ("n", "mean_sigma_n_sq", "se", "dev_q10", "dev_q50", "dev_q90"),
            summary)
    omega = sample_omega(proc, sched[-1], config.seed, 0)
    size = min(16, sched[-1])
    corr = correlation_table(sysm, omega, obs, ens, size)
    out.csv("correlations.csv", ("i", "j", "c_ij"),
            [(i, j, corr[i, j]) for i in range(size) for j in range(size)])
    section = {"schedule": sched, "realizations": config.realizations,
               "mean_sigma_n_sq": [row[1] for row in summary]}
    if len(sched) >= 3:
        fd = fluctuation_decay(sysm, proc, obs, ens, sched, config.realizations, config.seed,
                               "windowed", config.window, config.workers)
        out.csv("fluctuation.csv", ("n", "median_dev", "q10_dev", "q90_dev"), fd.rows())
        section["fluctuation_window"] = config.window
        section["fluctuation_slope"] = None if fd.fit is None else fd.fit.slope
    out.sections["quenched"] = section
    return section


# --------------------------------------------------------------------------
# limit variance
# --------------------------------------------------------------------------

def _burn_in(config: ExperimentConfig) -> int:
    return 2 * config.k_max if config.burn_in is None else config.burn_in


def limit_estimates(config: ExperimentConfig, routes=("vk", "gk", "split")) -> tuple:
    """Estimates for the requested routes plus notes on routes that were skipped."""
    sysm, proc, obs = config.system, config.process, config.observable
    K, r, R = config.k_max, _burn_in(config), config.realizations
    found, notes = [], {}
    if "vk" in routes:
        found.append(sigma_sq_series(sysm, proc, obs, config.ensemble(), R, config.seed, K=K,
                                     burn_in_i=r, workers=config.workers))
    if "gk" in routes:
        paired = DoubledEnsemble.product(config.ensemble(config.pair_size))
        found.append(green_kubo_doubled(sysm, proc, obs, paired, K, r, R, config.seed,
                                        workers=config.workers))
    if "split" in routes:
        try:
            found.append(classical_green_kubo_split(sysm, proc, obs, config.ensemble(), K, r,
                                                    max(R, 2), config.seed,
                                                    config.workers).as_estimate())
        except UnsupportedError as exc:
            notes["classical-gk-split"] = str(exc)
    return found, notes


def section_limit(config: ExperimentConfig, out: Outputs, routes=("vk", "gk", "split")) -> dict:
    found, notes = limit_estimates(config, routes)
    out.estimates = found
    out.csv("limit_terms.csv", ("route", "k", "term", "se"),
            [(e.route, k, v, s) for e in found for k, v, s in e.rows()])
    out.csv("limit_routes.csv",
            ("route", "sigma_sq", "se", "truncation_K", "burn_in", "sigma_sq_half_burn_in"),
            [(e.route, e.sigma_sq, e.standard_error, e.truncation_K, e.burn_in_i,
              e.sigma_sq_half_burn_in) for e in found])
    comparison = compare_routes(found)
    out.csv("route_consistency.csv", ("route_a", "route_b", "difference", "joint_se", "consistent"),
            comparison.pairs)
    section = {"estimates": {e.route: e.sigma_sq for e in found},
               "standard_errors": {e.route: e.standard_error for e in found},
               "consistent": comparison.consistent, "skipped": notes,
               "truncation_K": config.k_max, "burn_in": _burn_in(config)}
    out.sections["limit-variance"] = section
    return section


# --------------------------------------------------------------------------
# bound model and rates
# --------------------------------------------------------------------------

def resolve_bound_model(config: ExperimentConfig, vk: Optional[LimitVarianceEstimate] = None
                        ) -> tuple:
    """``(model or None, provenance dict)``; fitted from the run when not given."""
    if config.bounds is not None:
        m = config.bounds
        return m, {"source": "given", "psi": m.psi, "gamma": m.gamma, "zeta": m.zeta,
                   "delta": m.delta}
    if vk is None:
        vk = sigma_sq_series(config.system, config.process, config.observable, config.ensemble(),
                             config.realizations, config.seed, K=max(config.k_max, 2),
                             burn_in_i=_burn_in(config), workers=config.workers)
    ks = np.arange(len(vk.per_k_terms))
    weight = np.where(ks == 0, 1.0, 2.0)
    mags = np.abs(vk.per_k_terms) / weight
    # rounding noise counts as zero: stay above 1e-12 of the lag-0 term
    floor = np.maximum(3.0 * np.nan_to_num(vk.per_k_se) / weight, 1e-12 * mags[0])
    fit = fit_eta(ks[mags > floor], mags[mags > floor], 0.0) if np.any(mags > floor) else None
    info = {"source": "fit"}
    if fit is None or fit.model is None:
        eta = PowerLaw(max(float(mags[0]), 1e-300), FALLBACK_PSI)
        info["psi_note"] = "correlations below noise floor; fallback exponent"
    else:
        eta = fit.model
    proc = config.process
    gamma, c_alpha = None, 1.0
    if proc.is_finite and proc.kind != "constant":
        prof = mixing_profile(proc, max(config.k_max, 8))
        if prof.gamma is not None:
            gamma, c_alpha = prof.gamma, prof.poly_constant
    if gamma is None:
        gamma = max(eta.exponent, FALLBACK_GAMMA)
        info["gamma_note"] = "mixing coefficients vanish or are not estimable; fallback exponent"
    info.update({"psi": eta.exponent, "c_eta": eta.constant, "gamma": gamma, "c_alpha": c_alpha,
                 "zeta": config.zeta, "delta": config.delta})
    try:
        model = BoundModel(eta, PowerLaw(c_alpha, gamma), config.zeta, config.delta)
    except ParameterError as exc:
        info["unresolved"] = str(exc)
        return None, info
    return model, info


def rate_rows(model: BoundModel) -> list:
    psi, gamma, zeta, delta = model.psi, model.gamma, model.zeta, model.delta
    return [("main", main_rate(psi, gamma, zeta, delta).description),
            ("fluctuation", fluctuation_rate(psi, gamma, delta).description),
            ("mean_convergence", mean_convergence_rate(psi, zeta).description),
            ("variance_mean_gap", variance_mean_gap_rate(psi).description),
            ("h_zeta", h_zeta_rate(zeta).description)]


def section_rates(config: ExperimentConfig, out: Outputs,
                  vk: Optional[LimitVarianceEstimate] = None) -> dict:
    model, info = resolve_bound_model(config, vk)
    rows = rate_rows(model) if model is not None else []
    out.csv("rates.csv", ("quantity", "rate"), rows)
    section = {"bound_model": info, "rates": dict(rows)}
    out.sections["rate"] = section
    return section


# --------------------------------------------------------------------------
# positivity and CLT
# --------------------------------------------------------------------------

def section_positivity(config: ExperimentConfig, out: Outputs, psi: Optional[float] = None) -> dict:
    g = growth_data(config.system, config.process, config.observable, config.ensemble(),
                    config.schedule, config.realizations, config.seed, config.workers)
    out.csv("growth.csv", ("n", "mean_var_sn", "se"), list(zip(g.n, g.mean_var_sn, g.standard_error)))
    if psi is None:
        psi = config.bounds.psi if config.bounds is not None else FALLBACK_PSI
    try:
        v = positivity_check(g.n, g.mean_var_sn, psi)
        section = {"verdict": v.verdict, "exponent": v.exponent, "c": v.c, "c_se": v.c_se,
                   "reason": v.reason, "psi": psi}
    except DataError as exc:
        section = {"verdict": "not-run", "reason": str(exc), "psi": psi}
    out.sections["positivity"] = section
    return section


def section_clt(config: ExperimentConfig, out: Outputs, sigma_sq: Optional[float] = None) -> dict:
    if sigma_sq is None:
        sigma_sq = limit_estimates(config, ("vk",))[0][0].sigma_sq
    rep = triangle_report(config.system, config.process, config.observable,
                          config.ensemble(config.clt_size), config.schedule, sigma_sq, config.seed)
    out.csv("clt.csv", ("n", "d_kolmogorov", "d_fiber", "d_scale", "d_wasserstein", "sigma_n",
                        "sigma", "residual", "noise_se"),
            [(r.n, r.d_total, r.d_fiber, r.d_scale, r.d_wasserstein, r.sigma_n, r.sigma, r.residual,
              r.noise_se) for r in rep.rows])
    section = {"sigma_sq_estimate": sigma_sq, "degenerate": rep.degenerate,
               "min_residual": rep.min_residual if rep.rows else None,
               "monotone_within_1se": rep.monotone_within(1.0) if rep.rows else None,
               "final_distance": rep.rows[-1].d_total if rep.rows else None,
               "slope": None if rep.fit is None else rep.fit.slope}
    out.sections["clt"] = section
    return section


def run(config: ExperimentConfig) -> dict:
    """Write every section's CSVs and the manifest; return the manifest body."""
    out = outputs_for(config)
    section_quenched(config, out)
    section_limit(config, out)
    vk = out.estimates[0]
    section_rates(config, out, vk)
    section_clt(config, out, vk.sigma_sq)
    out.manifest({"bound_model": out.sections["rate"]["bound_model"]})
    return {"config_hash": out.config_hash, "csv": sorted(out.files), "sections": out.sections}


# --------------------------------------------------------------------------
# audit suite
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str


# windows on which the sandwich slopes have settled to within 0.1
SANDWICH_CASES = ((3.0, 1.0), (1.5, 5.0), (2.0, 0.5))
SANDWICH_M = tuple(2 ** e for e in range(4, 13))


def _golden_checks() -> list:
    out = []
    for table in ("golden_rates.csv", "golden_main_rate.csv"):
        rows = load_golden(table)
        bad = [f"{r.function}{r.params}" for r in rows if not r.matches()]
        out.append(Check(f"golden table {table}", not bad,
                         f"{len(rows) - len(bad)}/{len(rows)} rows match" + (f"; {bad}" if bad else "")))
    return out


def _sandwich_checks(m_values=SANDWICH_M) -> list:
    out = []
    for psi, gamma in SANDWICH_CASES:
        a = sandwich_audit(BoundModel.polynomial(psi, gamma), m_values)
        out.append(Check(f"S(0,m) sandwich psi={psi:g} gamma={gamma:g}", a.passed,
                         f"slope {a.fit.slope:.3f} vs {a.target_slope:.3f}, "
                         f"C1 printed {a.c1_printed:g} <= best {a.c1_best:.3g}"))
    return out


def identity_checks(tol: float = 1e-9) -> list:
    """Exact finite-ensemble identities on a small Markov-driven beta family."""
    system = MapSystem.beta((2.0, 3.0))
    process = SelectionProcess.markov(((0.9, 0.1), (0.1, 0.9)))
    f = Cosine(1)
    n, seed = 12, 7
    ens = Ensemble.sample(4096, seed)
    omega = sample_omega(process, n, seed, 0)
    checks = []

    table = correlation_table(system, omega, f, ens, n)
    direct = quenched_variance(system, omega, f, ens, n)
    d = abs(table.sum() / n - direct)
    checks.append(Check("double sum = direct variance", d <= tol, f"|diff| = {d:.2e}"))

    w_full = sigma_path(system, omega, f, ens, [n])[0]
    w_win = sigma_path(system, omega, f, ens, [n], window=n - 1)[0]
    d = abs(w_full - w_win)
    checks.append(Check("full window = full estimator", d <= tol, f"|diff| = {d:.2e}"))

    base = Ensemble.sample(128, seed, 1)
    z = z_variance(system, omega, f, DoubledEnsemble.product(base), n)
    d = abs(z - 2 * n * quenched_variance(system, omega, f, base, n))
    checks.append(Check("int Z_n^2 = 2 n sigma_n^2", d <= tol, f"|diff| = {d:.2e}"))

    rep = variance_identity_report(system, process, f, ens, n, 16, seed)
    checks.append(Check("E sigma_n^2 = joint - centering variance", abs(rep.residual) <= tol,
                        f"|residual| = {abs(rep.residual):.2e}"))

    vec = Stacked((Cosine(1), Sine(1)))
    pol = covariance_by_polarization(system, omega, vec, ens, n).matrix
    d = float(np.max(np.abs(pol - direct_covariance(system, omega, vec, ens, n))))
    checks.append(Check("polarization = direct covariance", d <= tol, f"max |diff| = {d:.2e}"))
    return checks


def audit(m_values=SANDWICH_M) -> list:
    return _golden_checks() + _sandwich_checks(m_values) + identity_checks()
