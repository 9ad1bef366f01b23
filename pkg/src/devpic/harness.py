"""Sweep harness: convergence ladders and the efficiency comparison.

Each sweep runs a prescribed parameter ladder, measures the relative L1
distribution error against a finer reference run, and reports rows of
(param, error, wall_s) plus a fitted log-log slope where meaningful.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .driver import Scenario, l1_error, phase_histogram, simulate

NEFF_LADDER_FACTORS = (8.0, 4.0, 2.0, 1.0)
DT_LADDER_FACTORS = (1.0, 0.5, 0.25, 0.125)


def _final_histogram(s: Scenario, replicates: int = 1) -> tuple[np.ndarray, float]:
    """Run (optionally seed-averaged) and return (histogram, stepping wall time)."""
    hists = []
    wall = 0.0
    for r in range(replicates):
        state, _ = simulate(replace(s, seed=s.seed + 1000 * r))
        hists.append(phase_histogram(state))
        wall += state.wall
    return np.mean(hists, axis=0), wall


def fit_loglog_slope(params, errors) -> float:
    return float(np.polyfit(np.log(params), np.log(errors), 1)[0])


def convergence_neff(base: Scenario, neff_unit: float, ref_factor: float = 0.5):
    """Effective-number ladder {8,4,2,1} x unit vs a reference at ref_factor x unit.

    Statistical (half-order) convergence: error ~ sqrt(n_eff).
    """
    ref_s = replace(base, n_eff=neff_unit * ref_factor, n_eff_c=None, seed=base.seed + 77)
    ref_hist, _ = _final_histogram(ref_s)
    rows = []
    for f in NEFF_LADDER_FACTORS:
        s = replace(base, n_eff=neff_unit * f, n_eff_c=None)
        hist, wall = _final_histogram(s)
        rows.append({"param": neff_unit * f, "error": l1_error(hist, ref_hist), "wall_s": wall})
    slope = fit_loglog_slope([r["param"] for r in rows], [r["error"] for r in rows])
    return rows, slope


def convergence_dt(base: Scenario, ref_factor: float = 0.0625, replicates: int = 4):
    """Time-step halving ladder at fixed n_eff vs a finer-dt reference.

    The deterministic error is first order in dt; seed-replicate averaging
    suppresses the statistical floor that otherwise dominates at desk scale.
    """
    ref_s = replace(base, dt_factor=base.dt_factor * ref_factor)
    ref_hist, _ = _final_histogram(ref_s, replicates)
    rows = []
    for f in DT_LADDER_FACTORS:
        s = replace(base, dt_factor=base.dt_factor * f)
        hist, wall = _final_histogram(s, replicates)
        rows.append({"param": base.dt_factor * f * base.grid.dx,
                     "error": l1_error(hist, ref_hist), "wall_s": wall})
    slope = fit_loglog_slope([r["param"] for r in rows], [r["error"] for r in rows])
    return rows, slope


def efficiency(base: Scenario, alphas=(0.1, 0.01, 0.001), neff_ladder=(4.0, 2.0, 1.0),
               neff_unit: float = 2e-5, ref_factor: float = 0.25):
    """Error-vs-CPU curves for hdp and pic_dsmc across damping amplitudes.

    For every alpha both methods run an n_eff ladder against a shared fine
    reference; the summary reports the CPU ratio pic/hdp at matched error
    (log-log interpolation of the pic curve at each hdp error level).
    """
    rows = []
    advantage = {}
    for alpha in alphas:
        ref_s = replace(base, alpha=alpha, method="hdp", n_eff=neff_unit * ref_factor,
                        n_eff_c=None, seed=base.seed + 55)
        ref_hist, _ = _final_histogram(ref_s)
        curves = {}
        for method in ("hdp", "pic_dsmc"):
            pts = []
            for f in neff_ladder:
                s = replace(base, alpha=alpha, method=method, n_eff=neff_unit * f, n_eff_c=None)
                hist, wall = _final_histogram(s)
                err = l1_error(hist, ref_hist)
                rows.append({"method": method, "alpha": alpha, "param": neff_unit * f,
                             "error": err, "wall_s": wall})
                pts.append((err, wall))
            curves[method] = np.array(sorted(pts))
        advantage[alpha] = _cpu_ratio_at_matched_error(curves["hdp"], curves["pic_dsmc"])
    return rows, advantage


def _cpu_ratio_at_matched_error(hdp: np.ndarray, pic: np.ndarray) -> float:
    """CPU(pic)/CPU(hdp) at the hdp curve's error levels (median over levels).

    Errors outside the pic curve's range use log-log extrapolation of the
    pic error-to-cpu relation.
    """
    log_pe = np.log(pic[:, 0])
    log_pw = np.log(pic[:, 1])
    if len(pic) >= 2:
        coef = np.polyfit(log_pe, log_pw, 1)
    else:
        coef = np.array([0.0, log_pw[0]])
    ratios = []
    for err, wall in hdp:
        pic_wall = np.exp(np.polyval(coef, np.log(err)))
        ratios.append(pic_wall / wall)
    return float(np.median(ratios))
