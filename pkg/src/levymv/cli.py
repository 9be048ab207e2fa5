"""Command-line front end: ``levymv {convergence,verify,poc,paths}``.

Settings come from built-in defaults, then an optional JSON ``--config`` file,
then flags (flags win).  Exit codes: 0 ok, 2 configuration error, 3 every
scheme diverged at every step size, 4 a verification check failed.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import taming
from .convergence import MseRecord, convergence_study, fit_rate, poc_sweep
from .models import (BUILTIN_MODELS, ModelSpec, build_model, sign_constants,
                     verify_coercivity_small_p, verify_growth, verify_monotonicity)
from .noise import TimeGrid, sample_bundle
from .simulate import Explosion, RecordOptions, simulate

log = logging.getLogger("levymv")

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_VERIFY = 0, 2, 3, 4
OUTPUT_ENV = "LEVYMV_OUTPUT_DIR"

# desk-scale versions of the two benchmark setups
MODEL_DEFAULTS = {
    "volatility32": dict(fine_steps=2 ** 12, coarse_factors=[2 ** k for k in range(4, 9)]),
    "double_well": dict(fine_steps=2 ** 13, coarse_factors=[2 ** k for k in range(3, 8)]),
    "custom": dict(fine_steps=2 ** 12, coarse_factors=[2 ** k for k in range(4, 9)]),
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    command: str = "convergence"
    model: str = "volatility32"
    model_params: dict = field(default_factory=dict)
    schemes: list = field(default_factory=lambda: list(taming.TAMED_PRESETS))
    fine_steps: Optional[int] = None
    coarse_factors: Optional[list] = None
    particles: int = 200
    repetitions: int = 4
    seed: int = 2024
    horizon: float = 1.0
    output_dir: str = ""
    workers: int = 1
    # verify
    eta: Optional[float] = None
    samples: int = 100_000
    box: tuple = (-5.0, 5.0)
    # poc / paths
    n_list: list = field(default_factory=lambda: [50, 100, 200, 400])
    max_paths: int = 500

    def resolve(self) -> "ExperimentConfig":
        if self.model not in MODEL_DEFAULTS:
            raise ConfigError(f"unknown model {self.model!r}")
        for name in self.schemes:
            if name not in taming.SCHEMES:
                raise ConfigError(f"unknown scheme {name!r}; known: {sorted(taming.SCHEMES)}")
        if not self.schemes:
            raise ConfigError("at least one scheme is required")
        defaults = MODEL_DEFAULTS[self.model]
        if self.fine_steps is None:
            self.fine_steps = defaults["fine_steps"] if self.command == "convergence" else 2 ** 8
        if self.coarse_factors is None:
            self.coarse_factors = list(defaults["coarse_factors"])
        if self.fine_steps < 1:
            raise ConfigError("fine_steps must be positive")
        if self.command == "convergence":
            bad = [f for f in self.coarse_factors if f < 1 or self.fine_steps % f]
            if bad:
                raise ConfigError(f"factors {bad} do not divide fine_steps={self.fine_steps}")
        if self.particles < 1 or self.repetitions < 1:
            raise ConfigError("particles and repetitions must be positive")
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise ConfigError("horizon must be positive")
        if self.workers is not None and self.workers < 1:
            self.workers = os.cpu_count() or 1
        if not self.output_dir:
            self.output_dir = os.environ.get(OUTPUT_ENV, "levymv_out")
        if self.command == "poc" and len(self.n_list) < 2:
            raise ConfigError("poc needs at least two particle counts")
        return self

    def build_model(self) -> ModelSpec:
        try:
            model = build_model(self.model, **self.model_params)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"cannot build model {self.model!r}: {exc}") from None
        model.horizon = self.horizon
        return model


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with ExperimentConfig keys")
    common.add_argument("--model", choices=sorted(MODEL_DEFAULTS))
    common.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                        help="model parameter override, e.g. --param d2=1.9 (repeatable)")
    common.add_argument("--scheme", action="append", dest="schemes",
                        choices=sorted(taming.SCHEMES), help="scheme preset (repeatable)")
    common.add_argument("--fine-steps", type=int)
    common.add_argument("--factors", help="comma-separated coarse factors, e.g. 16,32,64")
    common.add_argument("--particles", type=int)
    common.add_argument("--reps", type=int, dest="repetitions")
    common.add_argument("--seed", type=int)
    common.add_argument("--horizon", type=float)
    common.add_argument("--out", dest="output_dir", help=f"output directory (default ${OUTPUT_ENV})")
    common.add_argument("--workers", type=int, help="worker threads; 0 means all cores")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="levymv", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("convergence", parents=[common], help="strong-error study and rate fit")
    v = sub.add_parser("verify", parents=[common], help="sampled assumption and constant checks")
    v.add_argument("--eta", type=float)
    v.add_argument("--samples", type=int)
    p = sub.add_parser("poc", parents=[common], help="particle-count sweep")
    p.add_argument("--n-list", help="comma-separated ascending particle counts")
    q = sub.add_parser("paths", parents=[common], help="per-step particle trajectories")
    q.add_argument("--max-paths", type=int)
    return parser


def config_from_args(argv=None) -> ExperimentConfig:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    known = {f.name for f in fields(ExperimentConfig)}
    values = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        values.update(raw)
    for key in ("model", "schemes", "fine_steps", "particles", "repetitions", "seed",
                "horizon", "output_dir", "workers"):
        if getattr(args, key, None) is not None:
            values[key] = getattr(args, key)
    if args.factors:
        try:
            values["coarse_factors"] = [int(x) for x in args.factors.split(",")]
        except ValueError:
            raise ConfigError(f"bad --factors {args.factors!r}") from None
    if args.param:
        params = dict(values.get("model_params", {}))
        for item in args.param:
            key, sep, val = item.partition("=")
            if not sep:
                raise ConfigError(f"--param expects KEY=VALUE, got {item!r}")
            params[key.strip()] = _parse_value(val.strip())
        values["model_params"] = params
    for key in ("eta", "samples", "max_paths"):
        if getattr(args, key, None) is not None:
            values[key] = getattr(args, key)
    if getattr(args, "n_list", None):
        values["n_list"] = [int(x) for x in args.n_list.split(",")]
    if "box" in values:
        values["box"] = tuple(values["box"])
    values["command"] = args.command
    return ExperimentConfig(**values).resolve()


# ---------------------------------------------------------------------------
# CSV helpers

def _fmt(x: float) -> str:
    return repr(float(x))


def write_convergence_csv(path, records) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scheme", "dt", "rmse", "diverged"])
        for r in records:
            w.writerow([r.scheme, _fmt(r.dt), _fmt(r.rmse), "true" if r.diverged else "false"])


def read_convergence_csv(path, model: str = "") -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        return [MseRecord(float(row["dt"]), float(row["rmse"]), row["scheme"], model,
                          row["diverged"] == "true") for row in csv.DictReader(fh)]


def _plot(path, draw):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4.5))
    draw(ax)
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)


# ---------------------------------------------------------------------------
# commands

def run_convergence(cfg: ExperimentConfig, stream=None) -> int:
    stream = stream or sys.stdout
    model = cfg.build_model()
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    fine_dt = cfg.horizon / cfg.fine_steps
    factors = [f for f in cfg.coarse_factors if f != 1]
    all_records, fits = [], {}
    for name in cfg.schemes:
        sch = taming.scheme(name)
        log.info("convergence: model=%s scheme=%s", model.name, name)
        try:
            records, fit = convergence_study(model, sch, cfg.fine_steps, factors, cfg.particles,
                                             cfg.repetitions, cfg.seed, workers=cfg.workers,
                                             horizon=cfg.horizon)
        except Explosion:
            records = [MseRecord(fine_dt * f, math.nan, name, model.name, True) for f in factors]
            fit = None
        all_records.extend(records)
        fits[name] = fit
        if fit is None:
            print(f"scheme={name} slope=nan r2=nan", file=stream)
        else:
            print(f"scheme={name} slope={fit.slope:.4f} r2={fit.r_squared:.4f}", file=stream)

    csv_path = out / f"convergence_{model.name}.csv"
    write_convergence_csv(csv_path, all_records)

    def draw(ax):
        for name in cfg.schemes:
            pts = [(r.dt, r.rmse) for r in all_records if r.scheme == name and not r.diverged]
            if pts:
                x, y = zip(*pts)
                ax.loglog(x, y, "o-", base=2, label=name)
        usable = [r for r in all_records if not r.diverged and r.rmse > 0]
        if usable:
            dts = np.array(sorted({r.dt for r in usable}))
            anchor = np.exp(np.mean(np.log([r.rmse for r in usable])))
            ref = anchor * np.sqrt(dts / np.exp(np.mean(np.log(dts))))
            ax.loglog(dts, ref, "k--", base=2, label="slope 1/2")
        ax.set_xlabel("dt")
        ax.set_ylabel("RMSE at T")
        ax.set_title(model.name)
        if ax.get_legend_handles_labels()[0]:
            ax.legend()

    _plot(out / f"convergence_{model.name}.svg", draw)
    if all(r.diverged for r in all_records):
        return EXIT_DIVERGED
    return EXIT_OK


def verify_reports(cfg: ExperimentConfig) -> list:
    """All checks run by ``levymv verify`` as ``(label, passed, text)`` triples."""
    model = cfg.build_model()
    decl = model.declared
    needed = ("growth_gamma", "growth_C", "mono_eta", "mono_C")
    missing = [k for k in needed if k not in decl]
    if missing:
        raise ConfigError(f"model {model.name!r} declares no {missing}; cannot verify")
    eta = cfg.eta if cfg.eta is not None else decl["mono_eta"]
    rng = np.random.default_rng(cfg.seed)
    lines = []

    mono = verify_monotonicity(model, eta, decl["mono_C"], cfg.box, cfg.samples, rng)
    lines.append(("monotonicity", mono.passed, mono.line()))
    growth = verify_growth(model, decl["growth_gamma"], decl["growth_C"], cfg.box, cfg.samples, rng)
    lines.append(("growth", growth.passed, growth.line()))
    for p_bar in (1, 2, 3):
        rep = verify_coercivity_small_p(model, p_bar, 1.0, cfg.box, cfg.samples, rng)
        lines.append((f"coercivity_p{p_bar}", rep.passed, rep.line()))
    if model.name in BUILTIN_MODELS:
        for label, value in sign_constants(model):
            ok = value < 0
            lines.append(("sign", ok, f"{'PASS' if ok else 'FAIL'} sign {label} = {value:.10g}"))
    z, dt = taming.default_samples(cfg.samples, model.state_dim, rng=rng)
    for op in (taming.TANH, taming.TAME, taming.SINE):
        for check in (taming.check_bound, taming.check_diff):
            rep = check(op, z, dt)
            lines.append((f"{check.__name__}:{op.kind}", rep.passed,
                          f"{'PASS' if rep.passed else 'FAIL'} {check.__name__}[{op.kind}] "
                          f"max_violation={rep.max_violation:.6g} samples={rep.samples_used}"))
    return lines


def run_verify(cfg: ExperimentConfig, stream=None) -> int:
    stream = stream or sys.stdout
    try:
        lines = verify_reports(cfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    text = "\n".join([f"model={cfg.model} params={json.dumps(cfg.model_params, sort_keys=True)}"]
                     + [t for _, _, t in lines]) + "\n"
    (out / f"verify_{cfg.model}.txt").write_text(text, encoding="utf-8")
    stream.write(text)
    return EXIT_OK if all(ok for _, ok, _ in lines) else EXIT_VERIFY


def run_paths(cfg: ExperimentConfig, stream=None) -> int:
    stream = stream or sys.stdout
    model = cfg.build_model()
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid = TimeGrid(cfg.horizon, cfg.fine_steps)
    noise = sample_bundle(grid, cfg.particles, model.brownian_dim, model.intensity,
                          model.mark_sampler, cfg.seed)
    keep = min(cfg.max_paths, cfg.particles)
    for name in cfg.schemes:
        traj = simulate(model, taming.scheme(name), grid, noise,
                        RecordOptions(snapshot_indices="all", particles=keep))
        paths = np.stack([s.states[:, 0] for s in traj.snapshots], axis=1)  # (keep, steps+1)
        suffix = f"_{name}" if len(cfg.schemes) > 1 else ""
        csv_path = out / f"paths_{model.name}{suffix}.csv"
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["particle", "t", "y"])
            for i in range(keep):
                for k, t in enumerate(grid.times):
                    w.writerow([i, _fmt(t), _fmt(paths[i, k])])

        def draw(ax, paths=paths, name=name):
            ax.plot(grid.times, paths.T, lw=0.4, alpha=0.5)
            ax.set_xlabel("t")
            ax.set_ylabel("y")
            ax.set_title(f"{model.name}, {name}, dt={grid.dt:g}")

        _plot(out / f"paths_{model.name}{suffix}.png", draw)
        print(f"scheme={name} paths={keep} max_abs={np.max(np.abs(paths)):.4g}", file=stream)
    return EXIT_OK


def run_poc(cfg: ExperimentConfig, stream=None) -> int:
    stream = stream or sys.stdout
    model = cfg.build_model()
    if model.state_dim != 1:
        raise ConfigError("poc needs a one-dimensional model")
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    name = cfg.schemes[0]
    try:
        rows = poc_sweep(model, taming.scheme(name), cfg.n_list, cfg.fine_steps, cfg.seed,
                         horizon=cfg.horizon)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    with open(out / f"poc_{model.name}.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["N", "w2_to_largest"])
        for n, d in rows:
            w.writerow([n, _fmt(d)])
    trend = rows[-1][1] <= rows[0][1]
    print(f"trend {'ok' if trend else 'not decreasing'}: "
          f"N={rows[0][0]} -> {rows[0][1]:.4g}, N={rows[-1][0]} -> {rows[-1][1]:.4g}", file=stream)
    return EXIT_OK


COMMANDS = {"convergence": run_convergence, "verify": run_verify, "paths": run_paths, "poc": run_poc}


def main(argv=None) -> int:
    try:
        cfg = config_from_args(argv)
        return COMMANDS[cfg.command](cfg)
    except ConfigError as exc:
        print(f"levymv: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:  # argparse
        return int(exc.code) if isinstance(exc.code, int) else EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
