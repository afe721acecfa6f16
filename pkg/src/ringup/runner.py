"""Scenario execution: one full simulation feeding any number of analyses."""
from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from . import __version__
from . import dressed as dr
from . import entangle as ent
from . import leakage as lk
from . import reduced as rd
from . import shearfit as sf
from .config import ConfigError, ExperimentConfig, from_dict, validate
from .model import TWO_PI, build_drive_op, build_h0, flat_index
from .propagate import dressed_moments, evolve, write_csv
from .spectrum import cached_diagonalize, critical_photon_number, params_hash, resonant_drive_frequency

COHERENT_VARIANCE = 0.25


def code_version() -> str:
    """Package version plus a digest of the package sources."""
    h = hashlib.sha256()
    for path in sorted(Path(__file__).parent.glob("*.py")):
        h.update(path.read_bytes())
    return f"{__version__}+{h.hexdigest()[:12]}"


def tuned_params(cfg: ExperimentConfig):
    t = cfg.tuning
    if t.mode == "explicit":
        return cfg.params.replace(f_d=t.f_d)
    return cfg.params.replace(f_d=resonant_drive_frequency(cfg.params, t.k, t.n0) + t.offset)


@dataclass
class Context:
    """Lazily computed shared state for the analyses of one run."""

    cfg: ExperimentConfig
    cache_dir: str | None = None
    notes: dict = field(default_factory=dict)

    @cached_property
    def params(self):
        return tuned_params(self.cfg)

    @cached_property
    def basis(self):
        return cached_diagonalize(self.params, self.cache_dir)

    @property
    def k(self) -> int:
        return self.cfg.initial.k

    @cached_property
    def trajectory(self):
        p, cfg = self.params, self.cfg
        psi0 = np.zeros(p.dim, dtype=complex)
        if cfg.initial.state == "bare":
            psi0[flat_index(0, self.k)] = 1.0
        else:
            psi0 = self.basis.eigenvector(0, self.k)
        return evolve(build_h0(p), build_drive_op(p), cfg.envelope, psi0, cfg.t_end,
                      dt_out=cfg.dt_out, tol=cfg.tol)

    @property
    def times(self) -> np.ndarray:
        return self.trajectory.times

    @cached_property
    def dressed(self) -> np.ndarray:
        """Dressed amplitudes c[t, n, k] for every snapshot."""
        return np.array([self.basis.to_dressed(psi) for psi in self.trajectory.states])

    @cached_property
    def ladder_pop(self) -> np.ndarray:
        """Population per ladder, shape (T, 7)."""
        return np.sum(np.abs(self.dressed) ** 2, axis=1)

    def ladder(self, i: int) -> np.ndarray:
        c = self.dressed[i, :, self.k]
        return c / np.linalg.norm(c)

    @cached_property
    def nbar(self) -> np.ndarray:
        """Dressed photon number within the initial ladder."""
        n = np.arange(self.basis.n_res)
        p = np.abs(self.dressed[:, :, self.k]) ** 2
        return (p @ n) / np.sum(p, axis=1)

    @cached_property
    def p_stray(self) -> np.ndarray:
        pop = self.ladder_pop
        return 1.0 - pop[:, self.k] / np.sum(pop, axis=1)

    @cached_property
    def coherent_fits(self):
        """(F_c, alpha) of the best dressed-coherent fit per snapshot."""
        out = [dr.best_coherent_fit(self.ladder(i))[:2] for i in range(len(self.times))]
        return np.array([o[0] for o in out]), np.array([o[1] for o in out])

    @property
    def eps_ghz(self) -> complex:
        return self.cfg.envelope.peak


@dataclass
class AnalysisResult:
    tables: dict  # file suffix -> columns
    summary: dict


# ---------------------------------------------------------------- analyses

def analysis_fidelity(ctx: Context) -> AnalysisResult:
    fc, _ = ctx.coherent_fits
    fb = np.array([dr.fidelity_bare_coherent(psi, ctx.k)[0] for psi in ctx.trajectory.states])
    f = (1 - ctx.p_stray) * fc
    table = {
        "t_ns": ctx.times, "norm": ctx.trajectory.aux["norm"], "nbar": ctx.nbar,
        "P_stray": ctx.p_stray, "infid_dressed": 1 - f, "infid_bare": 1 - fb, "infid_c": 1 - fc,
    }
    summary = {
        "infid_dressed_end": float(1 - f[-1]), "infid_bare_end": float(1 - fb[-1]),
        "infid_c_end": float(1 - fc[-1]), "P_stray_end": float(ctx.p_stray[-1]),
        "norm_drift": float(np.max(np.abs(ctx.trajectory.aux["norm"] - 1))),
    }
    return AnalysisResult({"fidelity": table}, summary)


def _leak_target(ctx: Context) -> int:
    k = ctx.k
    return int(ctx.cfg.options.get("leak_to", k + 1))


def _predict(ctx: Context, j: int, nbar: float) -> lk.LeakagePrediction:
    k, p, b, eps = ctx.k, ctx.params, ctx.basis, ctx.eps_ghz
    if {k, j} == {0, 1}:
        return lk.predict_ground(p, b, nbar, eps)
    if (k, j) == (1, 2):
        return lk.predict_excited(p, b, nbar, eps)[1]
    raise ConfigError([f"{ctx.cfg.source}: no leakage model for ladder {k} -> {j}"])


def _safe(fn, *args, **kw) -> float:
    try:
        return float(fn(*args, **kw))
    except ValueError:
        return float("nan")


def analysis_leakage(ctx: Context) -> AnalysisResult:
    import warnings

    t, k = ctx.times, ctx.k
    total = np.sum(ctx.ladder_pop, axis=1)
    table = {"t_ns": t, "nbar": ctx.nbar, "P_stray": ctx.p_stray}
    nbar_of_t = lambda x: float(np.interp(x, t, ctx.nbar))  # noqa: E731
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for j in (k - 1, k + 1):
            if j < 0:
                continue
            table[f"P_ladder_{j}"] = ctx.ladder_pop[:, j] / total
            table[f"p_ss_{j}"] = np.array([_predict(ctx, j, n).p_ss for n in ctx.nbar])
            c = lk.integrate_c(ctx.basis, ctx.cfg.envelope, nbar_of_t, t, lower=min(k, j))
            table[f"c_model_{j}"] = np.abs(c) ** 2
        j = _leak_target(ctx)
        pred0 = _predict(ctx, j, 0.0)
        pred_end = _predict(ctx, j, float(ctx.nbar[-1]))
    trace = table[f"P_ladder_{j}"]
    period = TWO_PI / abs(pred0.omega_osc)
    tail = t >= t[-1] - 2 * period
    summary = {
        "p_max_model": pred0.p_max,
        "p_max_sim": lk.first_maximum(t, trace, period),
        "t_decay_model": pred0.t_decay,
        "t_decay_sim": _safe(lk.fit_decay_time, t, trace, period),
        "p_ss0_model": pred0.p_ss,
        "plateau_model": pred0.p_ss + pred_end.p_ss,
        "plateau_sim": float(np.mean(trace[tail])),
        "omega0_model": pred0.omega_osc,
        "model_valid": float(pred0.valid),
    }
    return AnalysisResult({"leakage": table}, summary)


def analysis_oscillation(ctx: Context) -> AnalysisResult:
    t, k = ctx.times, ctx.k
    j = _leak_target(ctx)
    total = np.sum(ctx.ladder_pop, axis=1)
    trace = ctx.ladder_pop[:, j] / total
    lower = min(k, j)
    gaps_delta, gaps_omega = lk.ladder_gaps(ctx.basis, lower)
    period = TWO_PI / abs(gaps_omega[0])
    centres, freqs = lk.oscillation_frequency(t, trace, int(ctx.cfg.options.get("window_periods", 10)), period)
    nb = np.interp(centres, t, ctx.nbar)
    idx = np.rint(nb).astype(int)
    delta = np.abs(gaps_delta[idx])
    omega = np.abs(gaps_omega[idx])
    rel = freqs / delta - 1
    table = {"t_ns": centres, "nbar": nb, "omega_sim": freqs, "delta_n": delta, "omega_model": omega, "rel_err": rel}
    summary = {"osc_max_rel_err": float(np.max(np.abs(rel))) if len(rel) else float("nan"),
               "osc_windows": float(len(rel))}
    return AnalysisResult({"oscillation": table}, summary)


def analysis_shear(ctx: Context) -> AnalysisResult:
    t = ctx.times
    profile = ctx.basis.profile(ctx.k)
    source = ctx.cfg.options.get("nbar_source", "simulation")
    eps = abs(TWO_PI * ctx.eps_ghz)
    nb = ctx.nbar if source == "simulation" else (eps * t) ** 2
    ctx.notes["shear_nbar_source"] = source
    q = sf.integrate_qbeta2(profile, nb, t)
    fc, _ = ctx.coherent_fits
    table = sf.shear_table(t, q, eps, float(profile.slope[0]), 1 - fc)
    summary = {
        "infid_est_integrated_end": float(table["infid_est_integrated"][-1]),
        "infid_est_closed_end": float(table["infid_est_closed"][-1]),
        "infid_sim_end": float(table["infid_sim"][-1]),
    }
    return AnalysisResult({"shear": table}, summary)


def _reduced_run(ctx: Context, mode: str) -> rd.ReducedTrajectory:
    key = f"_reduced_{mode}"
    if key not in ctx.notes:
        ctx.notes[key] = rd.evolve_reduced(
            ctx.basis.profile(ctx.k), ctx.cfg.envelope, rd.drive_modes(mode, ctx.basis, ctx.k),
            t_end=ctx.cfg.t_end, dt=float(ctx.cfg.options.get("reduced_dt", 0.01)), dt_out=ctx.cfg.dt_out,
        )
    return ctx.notes[key]


def analysis_squeeze(ctx: Context) -> AnalysisResult:
    opts = ctx.cfg.options
    mode = opts.get("drive_mode", "analytic")
    red = _reduced_run(ctx, mode)
    t = ctx.times
    every = float(opts.get("fit_every", 10.0))
    stride = max(1, int(round(every / ctx.cfg.dt_out)))
    picks = list(range(0, len(t), stride))
    if picks[-1] != len(t) - 1:
        picks.append(len(t) - 1)
    rows = {k: [] for k in ("t_ns", "nbar", "r_fit", "theta_fit", "infid_sq_fit", "vmin_ratio", "vmax_ratio",
                            "r_reduced", "uncertainty_product")}
    for i in picks:
        c = ctx.ladder(i)
        st = red.state(i)
        conv = rd.to_squeezed(st)
        beta = dressed_moments(c)[0]
        seed = dr.shear_to_squeeze(dr.ShearedParams(beta=beta, K=st.K, W=st.W, k=ctx.k)) if abs(beta) > 0 else conv
        f, opt = dr.best_squeezed_fit(c, seed) if abs(beta) > 1e-6 else (1.0, conv)
        vmin, vmax, _ = dr.quadrature_extrema(c)
        amin, amax = dr.analytic_quadrature_extrema(st.sheared)
        for key, val in zip(rows, (t[i], ctx.nbar[i], opt.r, opt.theta, 1 - f, vmin / COHERENT_VARIANCE,
                                   vmax / COHERENT_VARIANCE, conv.r, amin * amax)):
            rows[key].append(val)
    tables = {"squeeze": rows}

    q_every = float(opts.get("q_every", 50.0))
    q_points = int(opts.get("q_points", 61))
    qrows = {"t_ns": [], "re_alpha": [], "im_alpha": [], "q_value": []}
    for i in range(len(t)):
        if abs(t[i] / q_every - round(t[i] / q_every)) > 1e-9:
            continue
        c = ctx.ladder(i)
        grid = dr.default_q_grid(c, rd.to_squeezed(red.state(i)).r, q_points)
        q = dr.husimi_q(c, grid)
        qrows["t_ns"].extend([t[i]] * grid.size)
        qrows["re_alpha"].extend(grid.real.ravel())
        qrows["im_alpha"].extend(grid.imag.ravel())
        qrows["q_value"].extend(q.ravel())
    tables["husimi"] = qrows
    tables["husimi_levels"] = {"level": np.arange(1, 9) / (10 * np.pi)}
    summary = {
        "r_fit_end": float(rows["r_fit"][-1]), "r_reduced_end": float(rows["r_reduced"][-1]),
        "vmin_ratio_end": float(rows["vmin_ratio"][-1]), "vmax_ratio_end": float(rows["vmax_ratio"][-1]),
        "infid_sq_fit_end": float(rows["infid_sq_fit"][-1]),
        "uncertainty_product_end": float(rows["uncertainty_product"][-1]),
    }
    return AnalysisResult(tables, summary)


def analysis_reduced(ctx: Context) -> AnalysisResult:
    modes = ctx.cfg.options.get("drive_modes", list(rd.DRIVE_MODES))
    t = ctx.times
    coh_meas = []
    betas = []
    for i in range(len(t)):
        c = ctx.ladder(i)
        b = dressed_moments(c)[0]
        betas.append(b)
        coh_meas.append(1 - abs(dr.overlap_coherent(c, b)) ** 2)
    table = {"t_ns": t, "infid_coh_meas": np.array(coh_meas)}
    tables = {}
    summary = {"infid_coh_meas_end": float(coh_meas[-1])}
    for mode in modes:
        red = _reduced_run(ctx, mode)
        coh_int, sq_meas, sq_int = [], [], []
        for i in range(len(t)):
            c = ctx.ladder(i)
            st = red.state(i)
            coh_int.append(1 - abs(dr.overlap_coherent(c, st.beta)) ** 2)
            sq_int.append(1 - dr.fidelity_dressed_squeezed(c, rd.to_squeezed(st)))
            meas = dr.shear_to_squeeze(dr.ShearedParams(beta=betas[i], K=st.K, W=st.W, k=ctx.k))
            sq_meas.append(1 - dr.fidelity_dressed_squeezed(c, meas))
        r, _ = red.squeeze()
        table[f"infid_coh_int_{mode}"] = np.array(coh_int)
        table[f"infid_sq_meas_{mode}"] = np.array(sq_meas)
        table[f"infid_sq_int_{mode}"] = np.array(sq_int)
        table[f"r_{mode}"] = r
        tables[f"reduced_{mode}"] = red.table()
        summary[f"max_infid_sq_meas_{mode}"] = float(np.max(sq_meas))
        summary[f"infid_sq_int_end_{mode}"] = float(sq_int[-1])
        summary[f"r_end_{mode}"] = float(r[-1])
    tables["reduced"] = table
    return AnalysisResult(tables, summary)


def entangle_scan(basis, ns, alpha_phase: float = 0.0, k: int = 0) -> dict:
    """Fock vs coherent product infidelity and E_F on ladder k."""
    cols = {key: [] for key in ("x", "product_infidelity_fock", "e_f_fock",
                                "product_infidelity_coherent", "e_f_coherent", "condition_min")}
    for n in ns:
        fock = basis.eigenvector(int(n), k)
        c = dr.coherent_amplitudes(np.sqrt(n) * np.exp(1j * alpha_phase), basis.n_res)
        psi = basis.ladder_state(c, k)
        pa = ent.product_approx(basis, c, k)
        for key, val in zip(cols, (n, 1 - ent.best_product_fidelity(fock), ent.entanglement_of_formation(fock),
                                   pa.infidelity, ent.entanglement_of_formation(psi),
                                   min(ent.condition_metric(c, l) for l in range(-6, 7)))):
            cols[key].append(val)
    return {key: np.asarray(v, dtype=float) for key, v in cols.items()}


def analysis_entangle(ctx: Context) -> AnalysisResult:
    opts = ctx.cfg.options
    nc = critical_photon_number(ctx.params)
    n_max = int(opts.get("n_max", np.ceil(4 * nc)))
    n_min = int(opts.get("n_min", 1))
    step = int(opts.get("n_step", 1))
    if ctx.params.n_res < n_max + 8 * np.sqrt(n_max) + 20:
        raise ConfigError([f"{ctx.cfg.source}: params.n_res too small for coherent states up to n={n_max}"])
    table = entangle_scan(ctx.basis, range(n_min, n_max + 1, step), float(opts.get("alpha_phase", 0.0)), ctx.k)
    window = (table["x"] >= nc) & (table["x"] <= 4 * nc)
    summary = {
        "n_c": nc,
        "min_ratio_product": float(np.min(table["product_infidelity_fock"][window] / table["product_infidelity_coherent"][window])),
        "min_ratio_e_f": float(np.min(table["e_f_fock"][window] / table["e_f_coherent"][window])),
    }
    return AnalysisResult({"entangle": table}, summary)


ANALYSIS_FUNCS = {
    "fidelity": analysis_fidelity,
    "leakage": analysis_leakage,
    "oscillation": analysis_oscillation,
    "shear": analysis_shear,
    "squeeze": analysis_squeeze,
    "reduced": analysis_reduced,
    "entangle": analysis_entangle,
}


# ---------------------------------------------------------------- drivers

@dataclass
class RunResult:
    files: list
    summary: dict
    manifest: dict


def check(cfg: ExperimentConfig, check_dir: bool = True) -> None:
    errs = validate(cfg, check_dir=check_dir)
    if errs:
        raise ConfigError(errs)


def execute(cfg: ExperimentConfig, cache_dir: str | None = None) -> tuple[Context, dict, dict]:
    """Run every requested analysis; returns (context, tables, merged summary)."""
    check(cfg, check_dir=False)
    ctx = Context(cfg, cache_dir=cache_dir)
    tables, summary = {}, {}
    for name in cfg.outputs:
        res = ANALYSIS_FUNCS[name](ctx)
        tables.update(res.tables)
        summary.update(res.summary)
    return ctx, tables, summary


def run(cfg: ExperimentConfig, cache_dir: str | None = None, out_dir: str | None = None) -> RunResult:
    start = time.perf_counter()
    check(cfg)
    ctx, tables, summary = execute(cfg, cache_dir)
    out = Path(out_dir or cfg.out_dir)
    files = [str(write_csv(out / f"{cfg.name}_{suffix}.csv", cols)) for suffix, cols in tables.items()]
    manifest = {
        "name": cfg.name,
        "source": cfg.source,
        "params": ctx.params.as_dict(),
        "params_hash": params_hash(ctx.params),
        "version": code_version(),
        "wall_time_s": time.perf_counter() - start,
        "outputs": files,
        "summary": summary,
        "notes": {k: v for k, v in ctx.notes.items() if not k.startswith("_")},
    }
    path = out / f"{cfg.name}_manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str))
    return RunResult(files=files + [str(path)], summary=summary, manifest=manifest)


def _sweep_point(raw: dict, source: str, axis: str, value, cache_dir) -> dict:
    cfg = from_dict(raw, source=source).override(axis, value)
    return execute(cfg, cache_dir)[2]


def sweep(cfg: ExperimentConfig, axis: str, values: list, jobs: int = 1, cache_dir: str | None = None,
          out_dir: str | None = None) -> Path:
    """One summary row per value, merged in input order."""
    if not values:
        raise ConfigError([f"{cfg.source}: sweep needs at least one value"])
    cfg.override(axis, values[0])  # reject unknown axes before spawning workers
    for v in values:
        check(cfg.override(axis, v), check_dir=False)
    args = [(cfg.raw, cfg.source, axis, v, cache_dir) for v in values]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(values))) as pool:
            rows = list(pool.map(_sweep_point, *zip(*args)))
    else:
        rows = [_sweep_point(*a) for a in args]
    keys = list(dict.fromkeys(k for row in rows for k in row))
    lead = ["p_max_model", "p_max_sim", "t_decay_model", "t_decay_sim"]
    keys = [k for k in lead if k in keys] + [k for k in keys if k not in lead]
    cols = {"scan_param": np.asarray(values, dtype=float)}
    for k in keys:
        cols[k] = np.array([row.get(k, np.nan) for row in rows], dtype=float)
    out = Path(out_dir or cfg.out_dir)
    return write_csv(out / f"{cfg.name}_sweep_{axis}.csv", cols)
