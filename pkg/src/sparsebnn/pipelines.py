"""End-to-end inference pipelines and artifact management.

Each method writes its intermediate artifacts (dataset, posterior samples,
mixture, hyperparameter report, predictive fan) into the run directory and
finishes with a ``manifest.json`` naming every artifact plus the summary
scalars.  Completed stages are stamped with the config hash, so a rerun in
the same directory resumes from whatever is already on disk and produces
identical results.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

from . import __version__, network, predict
from .config import RunConfig, config_hash, serialize_config
from .data import (BOXCAR_TRUTH_ID, Dataset, boxcar_truth,
                   generate_boxcar_dataset, load_dataset, save_dataset)
from .gmm import Gmm, fit_gmm
from .hierarchical import HierConfig, run_hierarchical
from .laplace import MapConfig, laplace_fit, laplace_kernel, laplace_table
from .modes import extend_to_width
from .nsbl import (AlphaVector, EvidenceModel, Hyperprior, NsblResult,
                   optimize_alpha, sample_posterior)
from .priors import all_ard, all_flat_box, log_prior_batch, sample_known
from .rngstream import stream
from .tmcmc import TmcmcConfig, TmcmcResult, tmcmc_sample


class PipelineError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# artifact helpers
# ---------------------------------------------------------------------------


def save_samples_csv(path: Path, names: list[str], samples: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for row in samples:
            writer.writerow([repr(float(v)) for v in row])


def load_samples_csv(path: Path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        names = next(reader)
        rows = [[float(v) for v in r] for r in reader if r]
    return names, np.asarray(rows)


class StageStore:
    """Stamps completed stages with the config hash for resumable runs."""

    def __init__(self, out_dir: Path, cfg_hash: str):
        self.dir = out_dir / ".stages"
        self.dir.mkdir(parents=True, exist_ok=True)
        self.cfg_hash = cfg_hash

    def fresh(self, stage: str, paths: list[Path]) -> bool:
        stamp = self.dir / f"{stage}.json"
        if not stamp.exists() or not all(p.exists() for p in paths):
            return False
        try:
            with open(stamp) as fh:
                return json.load(fh).get("config_hash") == self.cfg_hash
        except (OSError, json.JSONDecodeError):
            return False

    def mark(self, stage: str) -> None:
        with open(self.dir / f"{stage}.json", "w") as fh:
            json.dump({"config_hash": self.cfg_hash, "stage": stage}, fh)


@dataclass
class RunContext:
    cfg: RunConfig
    out: Path
    store: StageStore
    artifacts: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    reused: list = field(default_factory=list)

    def path(self, name: str) -> Path:
        return self.out / name

    def record(self, key: str, path: Path) -> None:
        self.artifacts[key] = path.name

    def timed(self, stage: str):
        ctx = self

        class _Timer:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                ctx.timings[stage] = time.perf_counter() - self.t0

        return _Timer()


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------


def _stage_dataset(ctx: RunContext) -> Dataset:
    cfg = ctx.cfg
    path = ctx.path("data.csv")
    with ctx.timed("dataset"):
        if ctx.store.fresh("dataset", [path]):
            ds = load_dataset(path)
            ctx.reused.append("dataset")
        elif cfg.data.load is not None:
            ds = load_dataset(cfg.data.load)
            save_dataset(ds, path)
            ctx.store.mark("dataset")
        else:
            gen = dict(cfg.data.generate or {})
            gen.setdefault("n", 50)
            gen.setdefault("x_lo", -3.0)
            gen.setdefault("x_hi", 3.0)
            gen.setdefault("noise_var", 0.5)
            gen.setdefault("seed", cfg.seed)
            ds = generate_boxcar_dataset(int(gen["n"]), float(gen["x_lo"]),
                                         float(gen["x_hi"]),
                                         float(gen["noise_var"]),
                                         int(gen["seed"]))
            save_dataset(ds, path)
            ctx.store.mark("dataset")
    ctx.record("data", path)
    return ds


def _tmcmc_config(cfg: RunConfig) -> TmcmcConfig:
    t = cfg.tmcmc
    return TmcmcConfig(n_samples=t.n_samples, target_cov=t.target_cov,
                       proposal_scale=t.proposal_scale, max_stages=t.max_stages,
                       seed=cfg.seed, n_mh_steps=t.n_mh_steps)


def _stage_tmcmc(ctx: RunContext, ds: Dataset, spec: network.NetworkSpec):
    """Flat-box posterior sampling shared by the standard and NSBL pipelines."""
    cfg = ctx.cfg
    samples_path = ctx.path("samples.csv")
    trace_path = ctx.path("tmcmc_trace.jsonl")
    evid_path = ctx.path("tmcmc.json")
    layout = network.layout_for(spec)
    with ctx.timed("tmcmc"):
        if ctx.store.fresh("tmcmc", [samples_path, evid_path]):
            _, samples = load_samples_csv(samples_path)
            with open(evid_path) as fh:
                log_evidence = json.load(fh)["log_evidence"]
            ctx.reused.append("tmcmc")
        else:
            box = all_flat_box(spec.n_params, cfg.prior.box_lo, cfg.prior.box_hi)
            result = tmcmc_sample(
                lambda rng, n: sample_known(box, rng, n),
                lambda X: log_prior_batch(X, box),
                lambda X: network.log_likelihood_batch(ds, spec, X),
                _tmcmc_config(cfg), trace_path=trace_path)
            if not result.reached_beta_one:
                raise PipelineError("tmcmc did not reach beta = 1 within "
                                    "max_stages")
            samples = result.samples
            log_evidence = result.log_evidence
            save_samples_csv(samples_path, layout.names, samples)
            with open(evid_path, "w") as fh:
                json.dump({"log_evidence": log_evidence,
                           "n_stages": len(result.stages),
                           "betas": [s.beta for s in result.stages],
                           "acc_rates": [s.acc_rate for s in result.stages]},
                          fh, indent=2)
            ctx.store.mark("tmcmc")
    ctx.record("samples", samples_path)
    if trace_path.exists():
        ctx.record("tmcmc_trace", trace_path)
    ctx.record("tmcmc_summary", evid_path)
    ctx.summary["log_evidence_tmcmc"] = float(log_evidence)
    return samples


def _stage_gmm(ctx: RunContext, samples: np.ndarray) -> Gmm:
    cfg = ctx.cfg
    path = ctx.path("gmm.json")
    with ctx.timed("gmm"):
        if ctx.store.fresh("gmm", [path]):
            g = Gmm.load(path)
            ctx.reused.append("gmm")
        else:
            g = fit_gmm(samples,
                        k_candidates=range(cfg.gmm.k_min, cfg.gmm.k_max + 1),
                        n_restarts=cfg.gmm.n_restarts, seed=cfg.seed)
            g.save(path)
            ctx.store.mark("gmm")
    ctx.record("gmm", path)
    ctx.summary["gmm_n_kernels"] = len(g)
    return g


def _hyperprior(cfg: RunConfig) -> Hyperprior:
    hp = cfg.nsbl.hyperprior
    if hp.mode == "jeffreys":
        return Hyperprior("jeffreys")
    return Hyperprior("gamma", s=hp.s, r=hp.r)


def _stage_nsbl(ctx: RunContext, g: Gmm, spec: network.NetworkSpec) -> NsblResult:
    cfg = ctx.cfg
    layout = network.layout_for(spec)
    nsbl_path = ctx.path("nsbl.json")
    post_path = ctx.path("posterior_gmm.json")
    report_path = ctx.path("report.txt")
    partition = all_ard(spec.n_params)
    bounds = (cfg.nsbl.log_alpha_lo, cfg.nsbl.log_alpha_hi)
    with ctx.timed("nsbl"):
        if ctx.store.fresh("nsbl", [nsbl_path, post_path]):
            res = _load_nsbl_result(nsbl_path, post_path, bounds)
            ctx.reused.append("nsbl")
        else:
            res = optimize_alpha(g, _hyperprior(cfg), partition, bounds=bounds,
                                 seed=cfg.seed, n_starts=cfg.nsbl.n_starts)
            _save_nsbl_result(res, layout.names, nsbl_path, post_path)
            report_path.write_text(
                relevance_report(layout.names, res) + "\n")
            ctx.store.mark("nsbl")
    ctx.record("nsbl", nsbl_path)
    ctx.record("posterior_gmm", post_path)
    if report_path.exists():
        ctx.record("report", report_path)
    ctx.summary["log_alpha_map"] = {n: float(v) for n, v in
                                    zip(layout.names, res.log_alpha_map.log_alpha)}
    ctx.summary["gamma_rms"] = {n: float(v) for n, v in
                                zip(layout.names, res.gamma_rms)}
    ctx.summary["classification"] = dict(zip(layout.names, res.classification))
    ctx.summary["nsbl_objective"] = res.objective
    ctx.summary["nsbl_converged"] = bool(res.converged)
    return res


def _save_nsbl_result(res: NsblResult, names: list[str], nsbl_path: Path,
                      post_path: Path) -> None:
    res.posterior.save(post_path)
    payload = {
        "log_alpha_map": {n: float(v) for n, v in zip(names, res.log_alpha_map.log_alpha)},
        "bounds": list(res.log_alpha_map.bounds),
        "gamma_rms": {n: float(v) for n, v in zip(names, res.gamma_rms)},
        "gamma_kernels": res.gamma_kernels.tolist(),
        "classification": dict(zip(names, res.classification)),
        "objective": res.objective,
        "objective_trace": res.objective_trace,
        "log_alpha_trace": res.log_alpha_trace.tolist(),
        "distinct_optima": res.distinct_optima,
        "converged": bool(res.converged),
        "n_iterations": res.n_iterations,
        "posterior_gmm": post_path.name,
        "parameter_names": names,
    }
    with open(nsbl_path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _load_nsbl_result(nsbl_path: Path, post_path: Path, bounds) -> NsblResult:
    with open(nsbl_path) as fh:
        d = json.load(fh)
    names = d["parameter_names"]
    return NsblResult(
        log_alpha_map=AlphaVector(np.array([d["log_alpha_map"][n] for n in names]),
                                  bounds=tuple(d.get("bounds", bounds))),
        gamma_rms=np.array([d["gamma_rms"][n] for n in names]),
        gamma_kernels=np.asarray(d["gamma_kernels"]),
        classification=[d["classification"][n] for n in names],
        posterior=Gmm.load(post_path),
        objective=d["objective"],
        objective_trace=d["objective_trace"],
        log_alpha_trace=np.asarray(d["log_alpha_trace"]),
        distinct_optima=d["distinct_optima"],
        converged=d["converged"],
        n_iterations=d["n_iterations"],
    )


def relevance_report(names: list[str], res: NsblResult) -> str:
    """Fixed-width per-parameter table of the hyperparameter MAP results."""
    lines = [f"{'parameter':<14} {'log_alpha_map':>14} {'gamma_rms':>10} "
             f"{'classification':>15}"]
    for n, la, g, c in zip(names, res.log_alpha_map.log_alpha, res.gamma_rms,
                           res.classification):
        lines.append(f"{n:<14} {la:>14.3f} {g:>10.3f} {c:>15}")
    lines.append("")
    lines.append(f"objective at MAP: {res.objective:.6f}  "
                 f"(converged: {res.converged}, "
                 f"iterations: {res.n_iterations})")
    if len(res.distinct_optima) > 1:
        lines.append(f"distinct local optima found: {len(res.distinct_optima)}")
    return "\n".join(lines)


def _stage_fan(ctx: RunContext, spec: network.NetworkSpec, ds: Dataset,
               param_samples: np.ndarray, tag: str = "fan") -> predict.PredictiveFan:
    cfg = ctx.cfg
    p = cfg.predict
    fan_path = ctx.path(f"{tag}.csv")
    npy_path = ctx.path(f"{tag}_samples.npy")
    grid = np.linspace(p.x_lo, p.x_hi, p.n_points)
    with ctx.timed(tag):
        n = param_samples.shape[0]
        if n >= p.n_draws:
            idx = stream(cfg.seed, "predict", "subsample").choice(
                n, size=p.n_draws, replace=False)
            draws = param_samples[idx]
        else:
            draws = param_samples
        fan = predict.push_forward(spec, draws, grid,
                                   include_noise=p.include_noise,
                                   noise_var=ds.noise_var, seed=cfg.seed,
                                   levels=p.levels)
        predict.save_fan(fan, fan_path, npy_path)
    ctx.record(tag, fan_path)
    ctx.record(f"{tag}_samples", npy_path)
    if ds.truth_fn_id == BOXCAR_TRUTH_ID:
        x_lo = ds.meta.get("x_lo", float(ds.x[0]))
        x_hi = ds.meta.get("x_hi", float(ds.x[-1]))
        metrics = predict.extrapolation_metrics(fan, boxcar_truth, (x_lo, x_hi))
        ctx.summary[f"{tag}_metrics"] = metrics
    return fan


def _stage_laplace(ctx: RunContext, ds: Dataset, spec: network.NetworkSpec):
    cfg = ctx.cfg
    layout = network.layout_for(spec)
    path = ctx.path("laplace.json")
    hidden = spec.layer_sizes[1]
    start = extend_to_width(cfg.laplace.start_combination, hidden)
    map_cfg = MapConfig(bounds=(cfg.prior.box_lo, cfg.prior.box_hi),
                        max_iter=cfg.laplace.max_iter)
    with ctx.timed("laplace"):
        fit = laplace_fit(lambda v: network.log_likelihood(ds, spec, v),
                          lambda v: network.log_likelihood_grad(ds, spec, v),
                          start, map_cfg)
        payload = {
            "phi_map": {n: float(v) for n, v in zip(layout.names, fit.phi_map)},
            "sigma": fit.sigma.tolist(),
            "sigma_diag": {n: float(fit.sigma[i, i])
                           for i, n in enumerate(layout.names)},
            "converged": bool(fit.converged),
            "placeholders": [layout.names[i] for i in fit.placeholder_idx],
            "regularized": bool(fit.regularized),
            "start_combination": cfg.laplace.start_combination,
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    ctx.record("laplace", path)
    ctx.summary["laplace_converged"] = bool(fit.converged)
    ctx.summary["laplace_placeholders"] = payload["placeholders"]
    return fit


def _write_laplace_report(ctx: RunContext, rows: list[dict]) -> None:
    path = ctx.path("laplace_report.txt")
    header = (f"{'parameter':<14} {'phi_map':>10} {'Sigma_ii':>10} "
              f"{'log_alpha':>10} {'gamma_rms':>10} {'m_i':>10} {'P_ii':>10}")
    lines = [header]
    for r in rows:
        la = r.get("log_alpha_map")
        gm = r.get("gamma_rms")
        lines.append(
            f"{r['name']:<14} {r['phi_map']:>10.3f} {r['sigma_ii']:>10.3f} "
            f"{(f'{la:.3f}' if la is not None else '-'):>10} "
            f"{(f'{gm:.3f}' if gm is not None else '-'):>10} "
            f"{r.get('m_i', float('nan')):>10.3f} "
            f"{r.get('P_ii', float('nan')):>10.3f}"
            + ("   [unidentifiable at mode]" if r["placeholder"] else ""))
    path.write_text("\n".join(lines) + "\n")
    ctx.record("laplace_report", path)


# ---------------------------------------------------------------------------
# pipelines
# ---------------------------------------------------------------------------


def run_config(cfg: RunConfig) -> dict:
    """Execute the configured pipeline end to end; returns the manifest."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    chash = config_hash(cfg)
    ctx = RunContext(cfg=cfg, out=out, store=StageStore(out, chash))
    spec = network.NetworkSpec(cfg.network.layer_sizes, cfg.network.activation)
    layout = network.layout_for(spec)

    failed_stage = None
    error_msg = None
    try:
        ds = _stage_dataset(ctx)
        if cfg.method == "standard":
            samples = _stage_tmcmc(ctx, ds, spec)
            _stage_fan(ctx, spec, ds, samples)
        elif cfg.method == "nsbl":
            samples = _stage_tmcmc(ctx, ds, spec)
            g = _stage_gmm(ctx, samples)
            res = _stage_nsbl(ctx, g, spec)
            post_draws = sample_posterior(res.posterior, cfg.predict.n_draws,
                                          seed=cfg.seed)
            _stage_fan(ctx, spec, ds, post_draws)
        elif cfg.method == "hier":
            hcfg = HierConfig(gamma_shape=cfg.hier.gamma_shape,
                              gamma_rate=cfg.hier.gamma_rate,
                              log_alpha_box=(cfg.hier.log_alpha_lo,
                                             cfg.hier.log_alpha_hi),
                              tmcmc=_tmcmc_config(cfg))
            samples_path = ctx.path("samples.csv")
            with ctx.timed("hier"):
                if ctx.store.fresh("hier", [samples_path]):
                    names, joint = load_samples_csv(samples_path)
                    n_phi = spec.n_params
                    phi_samples = joint[:, :n_phi]
                    ctx.reused.append("hier")
                else:
                    hres = run_hierarchical(ds, spec, hcfg,
                                            trace_path=ctx.path("tmcmc_trace.jsonl"))
                    if not hres.tmcmc.reached_beta_one:
                        raise PipelineError("hierarchical tmcmc did not reach "
                                            "beta = 1")
                    save_samples_csv(samples_path, hres.column_names,
                                     hres.tmcmc.samples)
                    phi_samples = hres.phi_samples
                    ctx.summary["log_evidence_tmcmc"] = hres.tmcmc.log_evidence
                    _write_hier_summary(ctx, hres)
                    ctx.store.mark("hier")
            ctx.record("samples", samples_path)
            _stage_fan(ctx, spec, ds, phi_samples)
        elif cfg.method == "laplace":
            fit = _stage_laplace(ctx, ds, spec)
            rows = laplace_table(fit, layout)
            _write_laplace_report(ctx, rows)
        elif cfg.method == "laplace-nsbl":
            fit = _stage_laplace(ctx, ds, spec)
            g = laplace_kernel(fit)
            g.save(ctx.path("gmm.json"))
            ctx.record("gmm", ctx.path("gmm.json"))
            res = _stage_nsbl(ctx, g, spec)
            rows = laplace_table(fit, layout, res, all_ard(spec.n_params))
            _write_laplace_report(ctx, rows)
            post_draws = sample_posterior(res.posterior, cfg.predict.n_draws,
                                          seed=cfg.seed)
            _stage_fan(ctx, spec, ds, post_draws)
    except PipelineError as exc:
        failed_stage = _last_stage(ctx)
        error_msg = str(exc)
    except Exception as exc:  # noqa: BLE001 - recorded in the manifest
        failed_stage = _last_stage(ctx)
        error_msg = f"{type(exc).__name__}: {exc}"

    manifest = _write_manifest(ctx, chash, failed_stage, error_msg)
    if failed_stage is not None:
        raise PipelineError(f"stage {failed_stage!r} failed: {error_msg}")
    return manifest


def _last_stage(ctx: RunContext) -> str:
    return next(reversed(ctx.timings), "setup") if ctx.timings else "setup"


def _write_hier_summary(ctx: RunContext, hres) -> None:
    qs = [0.05, 0.25, 0.5, 0.75, 0.95]
    payload = {}
    for j, name in enumerate(hres.column_names):
        col = hres.tmcmc.samples[:, j]
        payload[name] = {f"q{int(q * 100):02d}": float(np.quantile(col, q))
                         for q in qs}
    path = ctx.path("hier_summary.json")
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    ctx.record("hier_summary", path)


def _write_manifest(ctx: RunContext, chash: str, failed_stage, error_msg) -> dict:
    manifest = {
        "schema_version": 1,
        "method": ctx.cfg.method,
        "config": serialize_config(ctx.cfg),
        "config_hash": chash,
        "seed": ctx.cfg.seed,
        "versions": {"sparsebnn": __version__, "numpy": np.__version__,
                     "scipy": scipy.__version__},
        "artifacts": dict(ctx.artifacts),
        "summary": ctx.summary,
        "timings": {k: round(v, 6) for k, v in ctx.timings.items()},
        "reused_stages": ctx.reused,
        "created": datetime.now(timezone.utc).isoformat(),
    }
    if failed_stage is not None:
        manifest["failed_stage"] = failed_stage
        manifest["error"] = error_msg
    path = ctx.out / "manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return manifest


# ---------------------------------------------------------------------------
# evidence / objective surfaces
# ---------------------------------------------------------------------------


def emit_surface(gmm_path, pair: tuple[str, str], names: list[str],
                 fixed_log_alpha: np.ndarray, hp: Hyperprior,
                 out_csv, grid_lo: float = -12.0, grid_hi: float = 12.0,
                 grid_n: int = 41) -> Path:
    """CSV grid of evidence, hyperprior and objective over one alpha pair.

    All other components stay fixed (typically at the MAP estimate).
    """
    g = Gmm.load(gmm_path) if not isinstance(gmm_path, Gmm) else gmm_path
    try:
        i = names.index(pair[0])
        j = names.index(pair[1])
    except ValueError as exc:
        raise PipelineError(f"unknown parameter name in pair: {exc}") from None
    if i == j:
        raise PipelineError("surface pair must name two distinct parameters")
    model = EvidenceModel(g, all_ard(g.dim))
    base = np.asarray(fixed_log_alpha, dtype=np.float64).copy()
    axis = np.linspace(grid_lo, grid_hi, grid_n)
    out_csv = Path(out_csv)
    with open(out_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["log_alpha_i", "log_alpha_j", "log_evidence",
                         "log_hyperprior", "objective"])
        for ti in axis:
            for tj in axis:
                la = base.copy()
                la[i] = ti
                la[j] = tj
                ev = model.log_evidence(la)
                hyper = hp.term(la)
                writer.writerow([repr(float(ti)), repr(float(tj)),
                                 repr(float(ev)), repr(float(hyper)),
                                 repr(float(ev + hyper))])
    return out_csv
