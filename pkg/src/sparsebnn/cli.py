"""Command-line entry point.

Subcommands: ``gen-data`` (write a dataset), ``run`` (execute a configured
pipeline), ``surface`` (evidence/hyperprior/objective grids over an alpha
pair), ``report`` (re-print persisted reports), ``predict`` (fan from a
sample artifact).  Exit codes: 0 success, 2 configuration error, 3
pipeline failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    from .config import ConfigError
    from .pipelines import PipelineError
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except PipelineError as exc:
        print(f"pipeline failure: {exc}", file=sys.stderr)
        return 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparsebnn",
        description="Sparse Bayesian learning for shallow networks: data "
                    "generation, inference pipelines, and report/surface "
                    "artifacts.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a boxcar dataset")
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--x-lo", type=float, default=-3.0)
    p.add_argument("--x-hi", type=float, default=3.0)
    p.add_argument("--noise-var", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True, help="CSV path to write")
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("run", help="run a configured inference pipeline")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None,
                   help="override the config seed")
    p.add_argument("--output", default=None,
                   help="override the config output_dir")
    p.add_argument("--threads", type=int, default=None,
                   help="cap worker threads (default: leave to the BLAS)")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("surface", help="emit evidence/objective grids "
                                       "over a hyperparameter pair")
    p.add_argument("--run", required=True, help="completed nsbl run directory")
    p.add_argument("--pair", required=True,
                   help="comma-separated parameter names, e.g. "
                        "'W^[2]_{11},W^[2]_{12}'")
    p.add_argument("--grid", default="-12,12,41",
                   help="lo,hi,n for both axes")
    p.add_argument("--output", default=None, help="CSV path (default: in run dir)")
    p.set_defaults(func=_cmd_surface)

    p = sub.add_parser("report", help="print the persisted run report")
    p.add_argument("--run", required=True, help="completed run directory")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("predict", help="predictive fan from a sample artifact")
    p.add_argument("--run", required=True, help="run directory with samples.csv")
    p.add_argument("--grid", default="-5,5,201", help="lo,hi,n evaluation grid")
    p.add_argument("--n-draws", type=int, default=1000)
    p.add_argument("--include-noise", action="store_true")
    p.add_argument("--output", default=None, help="CSV path (default: in run dir)")
    p.set_defaults(func=_cmd_predict)
    return parser


def _cmd_gen_data(args) -> int:
    from .data import generate_boxcar_dataset, save_dataset
    ds = generate_boxcar_dataset(args.n, args.x_lo, args.x_hi, args.noise_var,
                                 args.seed)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_dataset(ds, out)
    print(f"wrote {out} ({ds.n} points) and sidecar {out.with_suffix('.json')}")
    return 0


def _cmd_run(args) -> int:
    from dataclasses import replace

    from .config import load_config
    from .pipelines import run_config
    if args.threads is not None:
        _cap_threads(args.threads)
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.output is not None:
        cfg = replace(cfg, output_dir=args.output)
    manifest = run_config(cfg)
    print(f"run complete: {Path(cfg.output_dir) / 'manifest.json'}")
    for key, val in manifest["summary"].items():
        if isinstance(val, (int, float, str, bool)):
            print(f"  {key}: {val}")
    return 0


def _cap_threads(n: int) -> None:
    import os
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(max(1, n))


def _load_manifest(run_dir: str) -> tuple[Path, dict]:
    from .pipelines import PipelineError
    path = Path(run_dir) / "manifest.json"
    if not path.exists():
        raise PipelineError(f"no manifest.json under {run_dir}")
    with open(path) as fh:
        return path.parent, json.load(fh)


def _cmd_surface(args) -> int:
    from .nsbl import Hyperprior
    from .pipelines import PipelineError, emit_surface
    root, manifest = _load_manifest(args.run)
    if "gmm" not in manifest["artifacts"] or "log_alpha_map" not in manifest["summary"]:
        raise PipelineError("surface needs a completed nsbl or laplace-nsbl run")
    names = list(manifest["summary"]["log_alpha_map"])
    la_map = np.array([manifest["summary"]["log_alpha_map"][n] for n in names])
    pair = tuple(p.strip() for p in args.pair.split(","))
    if len(pair) != 2:
        raise PipelineError("--pair must name exactly two parameters")
    lo, hi, n = _parse_grid(args.grid)
    hp_cfg = manifest["config"]["nsbl"]["hyperprior"]
    hp = Hyperprior(hp_cfg["mode"], s=hp_cfg["s"], r=hp_cfg["r"]) \
        if hp_cfg["mode"] == "gamma" else Hyperprior("jeffreys")
    safe = [c if c.isalnum() else "_" for c in f"{pair[0]}__{pair[1]}"]
    out = Path(args.output) if args.output else root / f"surface_{''.join(safe)}.csv"
    emit_surface(root / manifest["artifacts"]["gmm"], pair, names, la_map, hp,
                 out, grid_lo=lo, grid_hi=hi, grid_n=n)
    print(f"wrote {out}")
    return 0


def _parse_grid(text: str) -> tuple[float, float, int]:
    from .pipelines import PipelineError
    try:
        lo_s, hi_s, n_s = text.split(",")
        return float(lo_s), float(hi_s), int(n_s)
    except ValueError:
        raise PipelineError(f"bad grid spec {text!r}; expected lo,hi,n") from None


def _cmd_report(args) -> int:
    root, manifest = _load_manifest(args.run)
    printed = False
    for key in ("report", "laplace_report"):
        if key in manifest["artifacts"]:
            print((root / manifest["artifacts"][key]).read_text(), end="")
            printed = True
    if not printed:
        print(json.dumps(manifest["summary"], indent=2))
    return 0


def _cmd_predict(args) -> int:
    from . import network, predict
    from .pipelines import PipelineError, load_samples_csv
    from .rngstream import stream
    root, manifest = _load_manifest(args.run)
    if "samples" not in manifest["artifacts"]:
        raise PipelineError("predict needs a run with a samples.csv artifact")
    spec = network.NetworkSpec(manifest["config"]["network"]["layer_sizes"],
                               manifest["config"]["network"]["activation"])
    names, samples = load_samples_csv(root / manifest["artifacts"]["samples"])
    samples = samples[:, :spec.n_params]      # hier artifacts carry alpha columns
    lo, hi, n = _parse_grid(args.grid)
    seed = manifest["seed"]
    if samples.shape[0] > args.n_draws:
        idx = stream(seed, "predict", "subsample").choice(
            samples.shape[0], size=args.n_draws, replace=False)
        samples = samples[idx]
    noise_var = float(manifest["config"]["data"].get("generate", {}).get(
        "noise_var", 0.5)) if manifest["config"]["data"].get("generate") else 0.5
    fan = predict.push_forward(spec, samples, np.linspace(lo, hi, n),
                               include_noise=args.include_noise,
                               noise_var=noise_var, seed=seed)
    out = Path(args.output) if args.output else root / "fan_cli.csv"
    predict.save_fan(fan, out, out.with_suffix(".npy"))
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
