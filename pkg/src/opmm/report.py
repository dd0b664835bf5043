"""CSV emission and figure rendering for runs and horizon sweeps.

The per-round CSV is the machine contract: comma delimiter, dot decimals, LF
endings, one header row, exactly one data row per round, floats at 17
significant digits so re-parsing reproduces the run bit for bit.  A sibling
``*_summary.csv`` file carries the final regrets and the evaluated theory
coefficients as key/value rows.  Figures are an optional convenience rendered
next to the CSV.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .metrics import fit_loglog_slope


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def run_csv_header(p: int) -> list:
    gcols = [f"g_{i + 1}" for i in range(p)]
    return ["t", "f_t_xt", *gcols, "lambda_norm", "comp_residual",
            "lag_residual_avg_norm", "viol_avg_max", "psi_bound", "step_bound_ok"]


def run_csv_rows(result) -> list:
    """Per-round rows with running averages, in round order."""
    p = result.records[0].g_xt.size
    n = result.records[0].x_t.size
    rows = []
    sum_h = np.zeros(n)
    sum_g = np.zeros(p)
    psi = result.bounds.psi_min
    for rec in result.records:
        sum_h += rec.stationarity_vector()
        sum_g += rec.g_xt
        rows.append([
            rec.t,
            rec.f_xt,
            *rec.g_xt.tolist(),
            float(np.linalg.norm(rec.lam_next)),
            rec.comp_residual(),
            float(np.linalg.norm(sum_h / rec.t)),
            float(np.max(sum_g / rec.t)),
            psi,
            bool(result.step_ok[rec.t - 1]),
        ])
    return rows


def write_run_csv(path, result) -> None:
    p = result.records[0].g_xt.size
    lines = [",".join(run_csv_header(p))]
    for row in run_csv_rows(result):
        lines.append(",".join(fmt(v) for v in row))
    Path(path).write_bytes(("\n".join(lines) + "\n").encode())


def summary_pairs(result, seed: int | None = None) -> list:
    reg = result.regrets()
    b = result.bounds
    pairs = [
        ("T", result.T),
        ("route", result.route),
        ("sigma", result.sigma),
        ("alpha", result.alpha),
    ]
    if seed is not None:
        pairs.append(("seed", seed))
    pairs += [
        ("regret_lagrangian", reg.lagrangian),
        ("regret_violation_max", reg.violation_max),
        *[(f"regret_violation_g_{i + 1}", v) for i, v in enumerate(reg.violation)],
        ("regret_complementarity", reg.complementarity),
        ("objective_avg", reg.objective_avg),
        ("beta0", result.consts.beta0),
        ("sigma_beta0_step_bound", b.step_bound),
        ("psi_bound_min", b.psi_min),
        ("psi_bound_argmin_s", b.psi_argmin_s),
        ("psi_bound_at_recommended_s", b.psi_recommended),
        ("recommended_s", b.s_recommended),
        ("rho0", b.rho0),
        ("violation_coeff", b.violation_coeff),
        ("comp_coeff", b.comp_coeff),
        ("step_bound_ok_all", bool(np.all(result.step_ok))),
        ("psi_bound_ok_all", bool(np.all(result.psi_ok))),
        ("comp_bound_ok_all", bool(np.all(result.comp_bound_ok))),
        ("solver_warning_rounds", len(result.warnings)),
        ("constants_source", "declared"),
        ("final_loss_source", "stream round T+1"),
    ]
    return pairs


def write_summary_csv(path, result, seed: int | None = None) -> None:
    lines = ["key,value"]
    for k, v in summary_pairs(result, seed=seed):
        lines.append(f"{k},{v if isinstance(v, str) else fmt(v)}")
    Path(path).write_bytes(("\n".join(lines) + "\n").encode())


def summary_path(csv_path) -> Path:
    csv_path = Path(csv_path)
    return csv_path.with_name(csv_path.stem + "_summary" + csv_path.suffix)


def figure_path(csv_path) -> Path:
    return Path(csv_path).with_suffix(".png")


def render_run_figure(path, result) -> None:
    """Per-round diagnostics: multiplier norm, residuals, running violation."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = run_csv_rows(result)
    p = result.records[0].g_xt.size
    t = [r[0] for r in rows]
    cols = {name: [r[i] for r in rows] for i, name in enumerate(run_csv_header(p))
            if name not in ("t", "step_bound_ok")}

    fig, axes = plt.subplots(2, 2, figsize=(9, 6), sharex=True)
    panels = [
        ("lambda_norm", "multiplier norm"),
        ("comp_residual", "complementarity residual"),
        ("lag_residual_avg_norm", "avg stationarity norm"),
        ("viol_avg_max", "max avg violation"),
    ]
    for ax, (key, title) in zip(axes.ravel(), panels):
        ax.plot(t, cols[key], lw=0.9)
        ax.set_title(title, fontsize=10)
        ax.grid(alpha=0.3)
    # show the multiplier cap only when it would not squash the curve
    lam_max = float(np.max(cols["lambda_norm"])) if cols["lambda_norm"] else 0.0
    if lam_max > 0 and result.bounds.psi_min <= 5.0 * lam_max:
        axes[0, 0].axhline(result.bounds.psi_min, color="tab:red", ls="--", lw=0.8,
                           label="multiplier cap")
        axes[0, 0].legend(fontsize=8)
    for ax in axes[1]:
        ax.set_xlabel("round")
    fig.suptitle(f"{result.route} route, T={result.T}", fontsize=11)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


SWEEP_COLUMNS = ["T", "sigma", "alpha", "regret_lagrangian", "regret_violation_max",
                 "regret_complementarity", "objective_avg", "psi_bound_min"]


def sweep_rows(results) -> list:
    rows = []
    for res in results:
        reg = res.regrets()
        rows.append([res.T, res.sigma, res.alpha, reg.lagrangian, reg.violation_max,
                     reg.complementarity, reg.objective_avg, res.bounds.psi_min])
    return rows


def sweep_slopes(results) -> dict:
    """Fitted log-log slopes of the averaged regrets against the horizon.

    The violation slope is fitted over horizons where the averaged violation
    is positive; with fewer than two positive points there is nothing to fit
    and the slope is reported as None.
    """
    horizons = np.array([res.T for res in results], dtype=float)
    regs = [res.regrets() for res in results]
    comp = np.array([r.complementarity for r in regs])
    viol = np.array([r.violation_max for r in regs])
    lag = np.array([r.lagrangian for r in regs])

    out = {"slope_complementarity": None, "slope_violation_max": None,
           "slope_lagrangian": None,
           "lagrangian_nonincreasing": bool(np.all(np.diff(lag) <= 1e-12)),
           "violation_positive_count": int(np.sum(viol > 0.0))}
    if np.all(comp > 0.0):
        out["slope_complementarity"] = fit_loglog_slope(horizons, comp)
    pos = viol > 0.0
    if int(np.sum(pos)) >= 2:
        out["slope_violation_max"] = fit_loglog_slope(horizons[pos], viol[pos])
    if np.all(lag > 0.0):
        out["slope_lagrangian"] = fit_loglog_slope(horizons, lag)
    return out


def write_sweep_csv(path, results) -> None:
    lines = [",".join(SWEEP_COLUMNS)]
    for row in sweep_rows(results):
        lines.append(",".join(fmt(v) for v in row))
    Path(path).write_bytes(("\n".join(lines) + "\n").encode())


def write_sweep_summary(path, results) -> None:
    lines = ["key,value"]
    for k, v in sweep_slopes(results).items():
        lines.append(f"{k},{'' if v is None else fmt(v)}")
    Path(path).write_bytes(("\n".join(lines) + "\n").encode())


def render_sweep_figure(path, results) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    horizons = [res.T for res in results]
    regs = [res.regrets() for res in results]
    series = [
        ("complementarity", [r.complementarity for r in regs]),
        ("max violation", [r.violation_max for r in regs]),
        ("stationarity", [r.lagrangian for r in regs]),
    ]
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for label, vals in series:
        vals = np.asarray(vals, dtype=float)
        if np.all(vals > 0.0):
            ax.loglog(horizons, vals, "o-", label=label)
        else:
            ax.plot(horizons, vals, "o-", label=f"{label} (linear scale)")
    ax.set_xlabel("horizon T")
    ax.set_ylabel("averaged regret")
    ax.grid(alpha=0.3, which="both")
    ax.legend(fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
