"""Command-line interface: configuration ingestion, stage dispatch, artifacts.

Subcommands
-----------
spectrum        characteristic roots, decomposition, dichotomy constants
simulate        one trajectory of the full equation, streamed as CSV
ergodic         time averages of the majorant process along an OU path
bound           feasibility condition and dimension bound (composed or --inputs)
pullback        pullback attractor clouds at the configured horizons
boxdim          box-counting + correlation dimension of a sampled cloud
cover           covering-lemma audit of the constructive ball covers
verify-squeeze  squeezing-estimate audit on sampled cloud pairs
pipeline        all of the above in dependency order

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure,
4 internal-consistency fault. Artifacts are JSON (reports) and CSV (time
series), written atomically, each carrying the config hash and seed.
The default output directory may also be set via $PULLBACKDIM_OUT.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .attractor import (
    PointCloud,
    estimate_absorbing_radius,
    load_cloud,
    pullback_sample,
    save_cloud,
    verify_squeezing,
)
from .bound import BoundInputs, ErgodicAverages, ergodic_averages, hausdorff_bound
from .config import RunConfig, load_config
from .errors import (
    EXIT_CONFIG,
    EXIT_CONSISTENCY,
    EXIT_NUMERICAL,
    EXIT_OK,
    ConfigError,
    ConsistencyError,
    NumericalError,
    RootConvergenceError,
)
from .geometry import box_dimension, correlation_dimension, covering_bound, grid_cover
from .noise import ou_path, sample_wiener
from .reporting import read_json, write_json_atomic, write_text_atomic
from .solver import ModelConfig, integrate_batch, noise_for
from .spectral import SpectralModel, build_model, laplacian_spectrum


# ---------------------------------------------------------------------------
# Stage implementations (shared between subcommands and the pipeline)
# ---------------------------------------------------------------------------


def _resolve_c(run: RunConfig, seed: int) -> float:
    if run.bound_params.c is not None:
        return float(run.bound_params.c)
    return estimate_absorbing_radius(run.model, seed)


def stage_spectrum(run: RunConfig, seed: int, outdir: Path) -> SpectralModel:
    bp = run.bound_params
    model = build_model(
        laplacian_spectrum(run.model.n_modes),
        mu=run.model.mu,
        sigma=run.model.sigma,
        tau=run.model.tau,
        cutoff_index=bp.cutoff_index,
        samples=bp.samples,
        n_branches=bp.n_branches,
        n_tau=bp.n_tau_estimate,
        seed=seed,
        K_override=bp.K_override,
        M_override=bp.M_override,
    )
    if model.estimation.get("branch_failures", 0) > 0:
        raise RootConvergenceError(
            f"{model.estimation['branch_failures']} characteristic branch(es) failed to converge"
        )
    payload = {"model": json.loads(model.to_json())}
    write_json_atomic(outdir / "spectrum.json", payload, run.to_dict(), seed)
    return model


def stage_ergodic(run: RunConfig, seed: int, c: float, outdir: Path) -> ErgodicAverages:
    num = run.numerics
    n = int(round(num.T_ergodic / run.model.h))
    w = sample_wiener(seed, run.model.m_channels, run.model.h, n)
    z = ou_path(w, run.model.mu)
    ea = ergodic_averages(z, run.model.F_coeffs, c, burn_in=num.burn_in)
    payload = {
        "ER": ea.er,
        "ER2": ea.er2,
        "ER_stderr": ea.er_stderr,
        "ER2_stderr": ea.er2_stderr,
        "burn_in": ea.burn_in,
        "span": ea.span,
        "n_batches": ea.n_batches,
        "c": c,
        "warning": ea.warning,
    }
    write_json_atomic(outdir / "ergodic.json", payload, run.to_dict(), seed)
    return ea


def _compose_inputs(run: RunConfig, model: SpectralModel, ea: ErgodicAverages, c: float) -> BoundInputs:
    lf = run.model.f_lipschitz
    return BoundInputs(
        alpha=run.bound_params.alpha,
        t0=run.bound_params.t0,
        K=model.K,
        M=model.M,
        rho1=model.rho1,
        rhom=model.rho_cut,
        k_m=model.k_m,
        L_f=lf,
        er=ea.er,
        er2=ea.er2,
        c=c,
        F_coeffs=run.model.F_coeffs,
        k_source=model.estimation.get("K_source", "estimated"),
        m_source=model.estimation.get("M_source", "estimated"),
    )


def stage_bound(run: RunConfig, seed: int, inputs: BoundInputs, outdir: Path):
    report = hausdorff_bound(inputs)
    write_json_atomic(outdir / "bound.json", report.to_dict(), run.to_dict(), seed)
    return report


def stage_pullback(run: RunConfig, seed: int, c: float, outdir: Path) -> list[PointCloud]:
    num = run.numerics
    clouds = pullback_sample(
        run.model, seed, num.horizons, num.n_initial, c=c, forward=run.forward_window
    )
    entries = []
    for cloud in clouds:
        name = f"cloud_T{cloud.horizon:g}_seed{seed}.bin"
        save_cloud(cloud, outdir / name)
        entries.append(
            {
                "file": name,
                "horizon": cloud.horizon,
                "n_points": cloud.n_points,
                "dim": cloud.dim,
                "diameter": cloud.metadata["diameter"],
                "hausdorff_to_previous": cloud.metadata["hausdorff_to_previous"],
            }
        )
    payload = {"seed": seed, "c": c, "clouds": entries}
    write_json_atomic(outdir / f"pullback_seed{seed}.json", payload, run.to_dict(), seed)
    return clouds


def stage_boxdim(run: RunConfig, seed: int, cloud: PointCloud, outdir: Path):
    box = box_dimension(cloud)
    corr = correlation_dimension(cloud)
    payload = {
        "horizon": cloud.horizon,
        "n_points": cloud.n_points,
        "box": box.to_dict(),
        "correlation": corr.to_dict(),
    }
    write_json_atomic(outdir / "boxdim.json", payload, run.to_dict(), seed)
    return box, corr


def stage_cover(run: RunConfig | None, seed: int | None, outdir: Path) -> list[dict]:
    results = []
    for m in range(1, 5):
        for ratio in (1.0, 2.0, 5.0):
            res = grid_cover(m, 1.0, ratio, "sup")
            results.append(
                {
                    "m": m,
                    "r1": 1.0,
                    "r2": ratio,
                    "norm": "sup",
                    "constructed": res.constructed_count,
                    "lemma_bound": res.lemma_bound,
                    "within_bound": res.within_lemma_bound,
                    "max_probe_distance": res.max_probe_distance,
                }
            )
    payload = {"audits": results, "all_within_bound": all(r["within_bound"] for r in results)}
    write_json_atomic(
        outdir / "cover.json", payload, None if run is None else run.to_dict(), seed
    )
    return results


def stage_squeeze(
    run: RunConfig,
    seed: int,
    model: SpectralModel,
    cloud: PointCloud,
    inputs: BoundInputs,
    outdir: Path,
):
    report = verify_squeezing(
        cloud, model, inputs, t0=run.bound_params.t0, n_pairs=run.numerics.n_pairs,
        cfg=run.model, pair_seed=seed + 9973,
    )
    write_json_atomic(outdir / "squeeze.json", report.to_dict(), run.to_dict(), seed)
    return report


def stage_simulate(run: RunConfig, seed: int, outdir: Path, snapshots: bool = False) -> Path:
    cfg = run.model
    T = run.numerics.T
    noise = noise_for(cfg, seed, -cfg.tau - cfg.h, T + cfg.h)
    zero = np.zeros((cfg.n_tau + 1, 1, cfg.n_modes))
    base = noise.index_of(0.0)
    rows: list[np.ndarray] = []

    def record(step: int, buf) -> None:
        rows.append(buf.newest[0] + noise.z_field[base + step])

    integrate_batch(cfg, noise, zero, T, start=0.0, on_step=record)
    outdir.mkdir(parents=True, exist_ok=True)
    csv_path = outdir / f"trajectory_seed{seed}.csv"
    fd, tmp = tempfile.mkstemp(dir=outdir, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        fh.write("t," + ",".join(f"c_{k + 1}" for k in range(cfg.n_modes)) + ",norm\n")
        for i, u in enumerate(rows):
            cells = [i * cfg.h, *(float(v) for v in u), float(np.linalg.norm(u))]
            fh.write(",".join(repr(v) for v in cells) + "\n")
    os.replace(tmp, csv_path)
    if snapshots:
        np.savez_compressed(
            outdir / f"trajectory_seed{seed}.npz",
            t=np.arange(len(rows)) * cfg.h,
            u=np.array(rows),
        )
    return csv_path


# ---------------------------------------------------------------------------
# Subcommand handlers
# ---------------------------------------------------------------------------


def _load_run(args) -> RunConfig:
    if not args.config:
        raise ConfigError("--config is required for this subcommand")
    run = load_config(args.config)
    if args.quick:
        run = run.quick()
    return run


def _outdir(args, run: RunConfig | None) -> Path:
    if args.out:
        out = Path(args.out)
    elif run is not None and run.output_dir:
        out = Path(run.output_dir)
    else:
        out = Path(os.environ.get("PULLBACKDIM_OUT", "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _seed(args, run: RunConfig | None) -> int:
    if args.seed is not None:
        return int(args.seed)
    if run is not None:
        return int(run.numerics.seeds[0])
    return 0


def cmd_spectrum(args) -> int:
    run = _load_run(args)
    model = stage_spectrum(run, _seed(args, run), _outdir(args, run))
    print(f"rho_1={model.rho1:.6g} rho_m={model.rho_cut:.6g} k_m={model.k_m} "
          f"K={model.K:.6g} M={model.M:.6g}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    run = _load_run(args)
    path = stage_simulate(run, _seed(args, run), _outdir(args, run), snapshots=args.snapshots)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_ergodic(args) -> int:
    run = _load_run(args)
    seed = _seed(args, run)
    c = _resolve_c(run, seed)
    ea = stage_ergodic(run, seed, c, _outdir(args, run))
    print(f"E(R)={ea.er:.6g}+-{ea.er_stderr:.2g} E(R^2)={ea.er2:.6g}+-{ea.er2_stderr:.2g}")
    return EXIT_OK


def cmd_bound(args) -> int:
    if args.inputs:
        d = read_json(args.inputs)
        try:
            inputs = BoundInputs(
                alpha=d["alpha"], t0=d["t0"], K=d["K"], M=d["M"], rho1=d["rho1"],
                rhom=d["rhom"], k_m=d["k_m"], L_f=d["L_f"], er=d["ER"], er2=d["ER2"],
                c=d.get("c", 0.0), F_coeffs=tuple(d.get("F_coeffs", ())),
                k_source=d.get("K_source", "user"), m_source=d.get("M_source", "user"),
            )
        except KeyError as exc:
            raise ConfigError(f"bound inputs file missing field {exc.args[0]!r}") from None
        run = load_config(args.config) if args.config else None
        outdir = _outdir(args, run)
        report = hausdorff_bound(inputs)
        write_json_atomic(
            outdir / "bound.json", report.to_dict(),
            None if run is None else run.to_dict(), _seed(args, run),
        )
    else:
        run = _load_run(args)
        seed = _seed(args, run)
        outdir = _outdir(args, run)
        model = _read_model(outdir)
        ea_d = _read_ergodic(outdir)
        ea = ErgodicAverages(
            er=ea_d["ER"], er2=ea_d["ER2"], er_stderr=ea_d["ER_stderr"],
            er2_stderr=ea_d["ER2_stderr"], burn_in=ea_d["burn_in"], span=ea_d["span"],
        )
        inputs = _compose_inputs(run, model, ea, ea_d["c"])
        report = stage_bound(run, seed, inputs, outdir)
    if report.feasible:
        print(f"feasible (margin {report.margin:.4g}); d_bound={report.d_bound:.6g}")
    else:
        print(f"infeasible (margin {report.margin:.4g}); no dimension bound")
    return EXIT_OK


def _read_model(outdir: Path) -> SpectralModel:
    path = outdir / "spectrum.json"
    if not path.exists():
        raise ConfigError(f"missing {path}; run the spectrum stage first")
    return SpectralModel.from_json(json.dumps(read_json(path)["model"]))


def _read_ergodic(outdir: Path) -> dict:
    path = outdir / "ergodic.json"
    if not path.exists():
        raise ConfigError(f"missing {path}; run the ergodic stage first")
    return read_json(path)


def _load_latest_cloud(args, run: RunConfig, seed: int, outdir: Path) -> PointCloud:
    if getattr(args, "cloud", None):
        return load_cloud(args.cloud)
    path = outdir / f"pullback_seed{seed}.json"
    if not path.exists():
        raise ConfigError(f"missing {path}; run the pullback stage first")
    entries = read_json(path)["clouds"]
    return load_cloud(outdir / entries[-1]["file"])


def cmd_pullback(args) -> int:
    run = _load_run(args)
    outdir = _outdir(args, run)
    seeds = [int(args.seed)] if args.seed is not None else list(run.numerics.seeds)
    c = _resolve_c(run, seeds[0])

    def one(seed: int):
        return stage_pullback(run, seed, c, outdir)

    if args.workers > 1 and len(seeds) > 1:
        with ThreadPoolExecutor(max_workers=args.workers) as pool:
            all_clouds = list(pool.map(one, seeds))
    else:
        all_clouds = [one(s) for s in seeds]
    for seed, clouds in zip(seeds, all_clouds):
        print(f"seed {seed}: final diameter {clouds[-1].metadata['diameter']:.4g}")
    return EXIT_OK


def cmd_boxdim(args) -> int:
    run = _load_run(args)
    seed = _seed(args, run)
    outdir = _outdir(args, run)
    cloud = _load_latest_cloud(args, run, seed, outdir)
    box, corr = stage_boxdim(run, seed, cloud, outdir)
    print(f"box slope={box.slope:.4g} (r2={box.r2_fit:.4g}); "
          f"correlation slope={corr.slope:.4g} (r2={corr.r2_fit:.4g})")
    return EXIT_OK


def cmd_cover(args) -> int:
    run = load_config(args.config) if args.config else None
    results = stage_cover(run, _seed(args, run), _outdir(args, run))
    bad = [r for r in results if not r["within_bound"]]
    print(f"{len(results)} covers audited; all within lemma bound: {not bad}")
    return EXIT_OK


def cmd_verify_squeeze(args) -> int:
    run = _load_run(args)
    seed = _seed(args, run)
    outdir = _outdir(args, run)
    model = _read_model(outdir)
    cloud = _load_latest_cloud(args, run, seed, outdir)
    ea_path = outdir / "ergodic.json"
    if ea_path.exists():
        ea_d = read_json(ea_path)
        er, er2, c = ea_d["ER"], ea_d["ER2"], ea_d["c"]
    else:
        er = er2 = 0.0
        c = _resolve_c(run, seed)
    ea = ErgodicAverages(er=er, er2=er2, er_stderr=0.0, er2_stderr=0.0, burn_in=0.0, span=0.0)
    inputs = _compose_inputs(run, model, ea, c)
    report = stage_squeeze(run, seed, model, cloud, inputs, outdir)
    print(f"squeezing satisfaction: slow {report.slow_rate:.1%}, fast {report.fast_rate:.1%} "
          f"over {report.n_pairs} pairs")
    return EXIT_OK


def cmd_pipeline(args) -> int:
    run = _load_run(args)
    seed = _seed(args, run)
    outdir = _outdir(args, run)
    model = stage_spectrum(run, seed, outdir)
    c = _resolve_c(run, seed)
    ea = stage_ergodic(run, seed, c, outdir)
    inputs = _compose_inputs(run, model, ea, c)
    bound_report = stage_bound(run, seed, inputs, outdir)
    clouds = stage_pullback(run, seed, c, outdir)
    box, corr = stage_boxdim(run, seed, clouds[-1], outdir)
    squeeze = stage_squeeze(run, seed, model, clouds[-1], inputs, outdir)
    stage_cover(run, seed, outdir)
    summary = {
        "stages": ["spectrum", "ergodic", "bound", "pullback", "boxdim", "verify-squeeze", "cover"],
        "k_m": model.k_m,
        "K": model.K,
        "M": model.M,
        "feasible": bound_report.feasible,
        "d_bound": bound_report.d_bound,
        "box_slope": box.slope,
        "correlation_slope": corr.slope,
        "squeeze_slow_rate": squeeze.slow_rate,
        "squeeze_fast_rate": squeeze.fast_rate,
        "final_cloud_diameter": clouds[-1].metadata["diameter"],
    }
    write_json_atomic(outdir / "pipeline.json", summary, run.to_dict(), seed)
    d_txt = "n/a" if bound_report.d_bound is None else f"{bound_report.d_bound:.4g}"
    print(
        f"pipeline done: feasible={bound_report.feasible} d_bound={d_txt} "
        f"box={box.slope:.3g} squeeze=({squeeze.slow_rate:.0%}, {squeeze.fast_rate:.0%})"
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser / entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pullbackdim",
        description="Stochastic delayed reaction-diffusion toolkit: attractor "
        "sampling, spectral dichotomy data, and Hausdorff-dimension bounds.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON or key=value run configuration")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--out", default=None,
                        help="output directory (default: config, then $PULLBACKDIM_OUT)")
    common.add_argument("--quick", action="store_true",
                        help="scale Monte-Carlo sizes down 10x for CI")
    common.add_argument("--workers", type=int, default=1, help="parallel seed workers")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("spectrum", parents=[common]).set_defaults(func=cmd_spectrum)
    p_sim = sub.add_parser("simulate", parents=[common])
    p_sim.add_argument("--snapshots", action="store_true", help="also write .npz snapshots")
    p_sim.set_defaults(func=cmd_simulate)
    sub.add_parser("ergodic", parents=[common]).set_defaults(func=cmd_ergodic)
    p_bound = sub.add_parser("bound", parents=[common])
    p_bound.add_argument("--inputs", help="JSON file with explicit bound inputs")
    p_bound.set_defaults(func=cmd_bound)
    sub.add_parser("pullback", parents=[common]).set_defaults(func=cmd_pullback)
    p_box = sub.add_parser("boxdim", parents=[common])
    p_box.add_argument("--cloud", help="cloud file (default: latest pullback artifact)")
    p_box.set_defaults(func=cmd_boxdim)
    sub.add_parser("cover", parents=[common]).set_defaults(func=cmd_cover)
    p_vs = sub.add_parser("verify-squeeze", parents=[common])
    p_vs.add_argument("--cloud", help="cloud file (default: latest pullback artifact)")
    p_vs.set_defaults(func=cmd_verify_squeeze)
    sub.add_parser("pipeline", parents=[common]).set_defaults(func=cmd_pipeline)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ConsistencyError as exc:
        print(f"internal-consistency fault: {exc}", file=sys.stderr)
        return EXIT_CONSISTENCY


if __name__ == "__main__":
    sys.exit(main())
