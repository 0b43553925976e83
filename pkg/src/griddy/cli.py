"""Experiment runner: seeded chains, kernel verification, studies, plots.

Every run writes into its own output directory: CSV tables (17 significant
digits, LF endings), a summary.json embedding the fully resolved config and
seed, and static SVG plots for the studies.  Reruns with the same seed are
byte-identical on the CSV side.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from typing import Optional, Sequence

import numpy as np

from .config import (
    REGISTRY,
    ConfigParseError,
    ConfigValidationError,
    ExperimentConfig,
    load_config_file,
    resolve_config,
)
from .conditional import Grid1D, RelativeClamp
from .diagnostics import autocorrelation, grid_convergence_study
from .errors import GriddyError
from .kernel_lab import (
    StateGrid,
    discretize_gibbs_kernel,
    discretize_griddy_kernel,
    discretize_metropolized_kernel,
    perturbation_report,
)
from .samplers import ChainConfig, ChainOutput, gibbs_chain, griddy_chain, metropolized_griddy_chain
from .targets import TargetDensity, beta_mixture_2d

SEED_ENV = "GRIDDY_SEED"

__all__ = ["main", "SEED_ENV"]


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def _write_csv(path: str, header: Sequence[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_summary(out_dir: str, command: str, cfg: ExperimentConfig,
                   artifacts: Sequence[str], extra: dict) -> str:
    path = os.path.join(out_dir, "summary.json")
    payload = {
        "command": command,
        "seed": cfg["chain.seed"],
        "config": cfg.as_dict(),
        "artifacts": list(artifacts),
    }
    payload.update(extra)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return path


def _pyplot():
    import matplotlib

    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "griddy"
    return plt


def _build_target(cfg: ExperimentConfig) -> TargetDensity:
    # target.name is validated against the registry; only one target ships.
    return beta_mixture_2d()


def _clamp(cfg: ExperimentConfig) -> RelativeClamp:
    return RelativeClamp(cfg["sampler.clamp_eps_rel"], cfg["sampler.clamp_m_rel"])


def _axis_grids(target: TargetDensity, n: int) -> list[Grid1D]:
    return [
        Grid1D.uniform(*target.domain.interval(i), n)
        for i in range(target.domain.dim)
    ]


def _run_chain(cfg: ExperimentConfig, target: TargetDensity) -> ChainOutput:
    chain = ChainConfig(
        n_steps=cfg["chain.n_steps"],
        seed=cfg["chain.seed"],
        burn_in=cfg["chain.burn_in"],
    )
    kind = cfg["sampler.kind"]
    if kind == "gibbs":
        return gibbs_chain(target, chain)
    grids = _axis_grids(target, cfg["sampler.grid_n"])
    sampler = griddy_chain if kind == "griddy" else metropolized_griddy_chain
    return sampler(target, grids, chain, cfg["sampler.scheme"], _clamp(cfg))


def _cmd_sample(cfg: ExperimentConfig) -> str:
    target = _build_target(cfg)
    output = _run_chain(cfg, target)
    out_dir = cfg["output.dir"]
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "samples.csv")
    dim = output.samples.shape[1]
    _write_csv(csv_path, [f"x{i + 1}" for i in range(dim)], output.samples)
    summary = _write_summary(out_dir, "sample", cfg, [csv_path], {
        "n_samples": int(output.samples.shape[0]),
        "acceptance_rate": output.acceptance_rate,
        "target_eval_count": output.target_eval_count,
    })
    return f"sample: {output.samples.shape[0]} rows -> {csv_path} ({summary})"


def _cmd_kernel_verify(cfg: ExperimentConfig) -> str:
    target = _build_target(cfg)
    m = cfg["study.state_grid"]
    grid = StateGrid(target.domain, (m,) * target.domain.dim)
    grids = _axis_grids(target, cfg["sampler.grid_n"])
    scheme = cfg["sampler.scheme"]
    clamp = _clamp(cfg)
    reference = discretize_gibbs_kernel(target, grid)
    if cfg["sampler.kind"] == "metropolized":
        approx = discretize_metropolized_kernel(target, grid, grids, scheme, clamp)
    else:
        approx = discretize_griddy_kernel(target, grid, grids, scheme, clamp)
    report = perturbation_report(reference, approx, cfg["study.norm_p"])
    out_dir = cfg["output.dir"]
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "report.json")
    with open(path, "w", encoding="utf-8") as handle:
        json.dump({
            "report": report.as_dict(),
            "seed": cfg["chain.seed"],
            "config": cfg.as_dict(),
        }, handle, indent=2, sort_keys=True)
        handle.write("\n")
    _write_summary(out_dir, "kernel-verify", cfg, [path], {
        "kernel_dist": report.kernel_dist,
        "measure_dist": report.measure_dist,
        "doeblin_eps": report.doeblin_eps,
    })
    return (
        f"kernel-verify: {m}^{target.domain.dim} states, "
        f"kernel_dist={report.kernel_dist:.3e}, "
        f"measure_dist={report.measure_dist:.3e} -> {path}"
    )


def _study_plot(path: str, result) -> None:
    plt = _pyplot()
    sizes = [row.grid_size for row in result.rows]
    fig, (left, right) = plt.subplots(1, 2, figsize=(9.0, 4.0))
    for axis, sup_key, l2_key, title in (
        (left, "marginal_sup", "marginal_l2", "marginal ECDF error"),
        (right, "joint_sup", "joint_l2", "joint ECDF error"),
    ):
        sup = [getattr(row, sup_key) for row in result.rows]
        l2 = [getattr(row, l2_key) for row in result.rows]
        axis.loglog(sizes, sup, "o-", label="sup")
        axis.loglog(sizes, l2, "s-", label="L2")
        axis.axhline(getattr(result.floor, sup_key), ls="--", c="gray",
                     label="reference-chain floor")
        axis.set_xlabel("grid points per axis")
        axis.set_title(title)
        axis.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _run_study(cfg: ExperimentConfig, command: str) -> str:
    target = _build_target(cfg)
    result = grid_convergence_study(
        target,
        cfg["study.grid_sizes"],
        cfg["chain.n_steps"],
        cfg["chain.seed"],
        scheme=cfg["sampler.scheme"],
        clamp=_clamp(cfg),
        replicates=cfg["study.replicates"],
    )
    out_dir = cfg["output.dir"]
    os.makedirs(out_dir, exist_ok=True)
    table_path = os.path.join(out_dir, "table.csv")
    _write_csv(
        table_path,
        ["grid_n", "marginal_sup", "marginal_l2", "joint_sup", "joint_l2",
         "target_eval_count"],
        [(r.grid_size, r.marginal_sup, r.marginal_l2, r.joint_sup, r.joint_l2,
          r.target_eval_count) for r in result.rows],
    )
    svg_path = os.path.join(out_dir, "study.svg")
    _study_plot(svg_path, result)
    floor = result.floor
    _write_summary(out_dir, command, cfg, [table_path, svg_path], {
        "slope_marginal_sup": result.slope_marginal_sup,
        "pre_floor_sizes": list(result.pre_floor_sizes),
        "floor": {
            "marginal_sup": floor.marginal_sup,
            "marginal_l2": floor.marginal_l2,
            "joint_sup": floor.joint_sup,
            "joint_l2": floor.joint_l2,
            "target_eval_count": floor.target_eval_count,
        },
    })
    return (
        f"{command}: {len(result.rows)} study points, "
        f"slope={result.slope_marginal_sup:.3f} -> {table_path}, {svg_path}"
    )


def _cmd_grid_study(cfg: ExperimentConfig) -> str:
    return _run_study(cfg, "grid-study")


def _cmd_reproduce(cfg: ExperimentConfig) -> str:
    cfg = cfg.updated(**{
        "target.name": "beta_mixture",
        "sampler.kind": "griddy",
        "sampler.scheme": "pl",
        "study.grid_sizes": (6, 11, 21, 41, 81),
        "chain.n_steps": 100_000,
    })
    return _run_study(cfg, "reproduce-6-1")


def _cmd_acf(cfg: ExperimentConfig) -> str:
    target = _build_target(cfg)
    output = _run_chain(cfg, target)
    series = autocorrelation(output, cfg["acf.coordinate"], cfg["acf.max_lag"])
    out_dir = cfg["output.dir"]
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "acf.csv")
    _write_csv(csv_path, ["lag", "rho"], zip(series.lags, series.values))
    svg_path = os.path.join(out_dir, "acf.svg")
    plt = _pyplot()
    fig, axis = plt.subplots(figsize=(6.0, 4.0))
    axis.plot(series.lags, series.values)
    axis.set_xlabel("lag")
    axis.set_ylabel("autocorrelation")
    axis.set_title(f"coordinate {cfg['acf.coordinate']}, IAT = {series.iat:.2f}")
    fig.tight_layout()
    fig.savefig(svg_path, format="svg", metadata={"Date": None})
    plt.close(fig)
    _write_summary(out_dir, "acf", cfg, [csv_path, svg_path], {
        "iat": series.iat,
        "acceptance_rate": output.acceptance_rate,
    })
    return f"acf: IAT = {series.iat:.3f} -> {csv_path}, {svg_path}"


_COMMANDS = {
    "sample": _cmd_sample,
    "kernel-verify": _cmd_kernel_verify,
    "grid-study": _cmd_grid_study,
    "acf": _cmd_acf,
    "reproduce-6-1": _cmd_reproduce,
}

_HELP = {
    "sample": "run one chain and write its samples",
    "kernel-verify": "discretize kernels and write the perturbation report",
    "grid-study": "ECDF error vs conditional grid size",
    "acf": "autocorrelation and IAT of one chain coordinate",
    "reproduce-6-1": "canned grid study: chain length 1e5, sizes 6..81, linear scheme",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="griddy",
        description="Seeded experiment runner for grid-based Gibbs samplers.",
        epilog=(
            f"Seed precedence: the {SEED_ENV} environment variable beats "
            "--seed, which beats chain.seed from --config."
        ),
    )
    commands = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        sub = commands.add_parser(
            name,
            help=_HELP[name],
            epilog=(
                f"The {SEED_ENV} environment variable overrides every other "
                "seed source."
            ),
        )
        sub.add_argument("--config", metavar="PATH", help="config file to load")
        sub.add_argument(
            "--seed",
            type=int,
            metavar="INT",
            help=f"chain seed; overridden by {SEED_ENV}, overrides config files",
        )
        for key, spec in REGISTRY.items():
            sub.add_argument(
                f"--{key}",
                dest=key,
                metavar="VALUE",
                help=spec.help,
            )
    return parser


def _resolve(ns: argparse.Namespace) -> ExperimentConfig:
    raw = load_config_file(ns.config) if ns.config else {}
    flags = vars(ns)
    for key in REGISTRY:
        if flags.get(key) is not None:
            raw[key] = flags[key]
    cfg = resolve_config(raw)
    seed = cfg["chain.seed"]
    if ns.seed is not None:
        seed = ns.seed
    env_seed = os.environ.get(SEED_ENV)
    if env_seed is not None:
        try:
            seed = int(env_seed, 10)
        except ValueError:
            raise ConfigValidationError(
                f"field 'chain.seed': {SEED_ENV}={env_seed!r} is not an integer"
            ) from None
    if seed < 0:
        raise ConfigValidationError("field 'chain.seed': seed must be nonnegative")
    return cfg.updated(**{"chain.seed": seed})


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = _resolve(ns)
        print(_COMMANDS[ns.command](cfg))
    except ConfigParseError as exc:
        print(f"griddy: config parse error: {exc}", file=sys.stderr)
        return 2
    except ConfigValidationError as exc:
        print(f"griddy: invalid config: {exc}", file=sys.stderr)
        return 3
    except (GriddyError, ValueError, OSError) as exc:
        name = type(exc).__module__ + "." + type(exc).__name__
        print(f"griddy: {name}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
