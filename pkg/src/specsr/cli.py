"""Batch command line for the reconstruction pipeline.

Subcommands wrap one stage each (synth, degrade, learn, transfer,
reconstruct, evaluate) plus ``pipeline`` for the full composition. Every
command writes a ``manifest.json`` capturing all resolved flags; any command
can be replayed with ``--from-manifest`` (optionally redirecting output with
``--out-dir``), reproducing its float64 outputs bit for bit.

Exit codes: 0 success, 1 runtime or data error, 2 flag/usage error. Progress
goes to stderr one line per stage; the human-readable summary goes to stdout;
all data products are files.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from .admm import reconstruct
from .dictionary import KsvdConfig, ksvd
from .forward import NoiseSpec, degrade
from .io import (
    export_matrix_csv,
    read_cube,
    read_dictionary,
    read_matrix_csv,
    read_srf,
    write_cube,
    write_dictionary,
)
from .metrics import evaluate_quality
from .pipeline import (
    PipelineParams,
    load_manifest,
    run_pipeline,
    write_manifest,
)
from .scenes import DomainShift, SceneSpec, generate_scene_pair
from .sparse_coding import OmpConfig
from .transfer import TransferConfig, transfer
from .types import CoefficientMatrix

_DEFAULTS = PipelineParams()


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {value}")
    return value


def _nonnegative_float(text: str) -> float:
    value = float(text)
    if not value >= 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {value}")
    return value


class UsageError(Exception):
    """Missing or inconsistent flags discovered after manifest resolution."""


def _require(args: argparse.Namespace, *names: str) -> None:
    missing = [
        "--" + name.replace("_", "-")
        for name in names
        if getattr(args, name, None) is None
    ]
    if missing:
        raise UsageError(f"missing required arguments: {', '.join(missing)}")


class _StageLog:
    """Tracks the active stage so errors can name the module that failed."""

    def __init__(self) -> None:
        self.current = "cli"

    def __call__(self, name: str) -> None:
        self.current, _, detail = name.partition(": ")
        print(f"[{self.current}] {detail or self.current}", file=sys.stderr)


def _apply_manifest(args: argparse.Namespace, command: str) -> argparse.Namespace:
    if not getattr(args, "from_manifest", None):
        if args.out_dir is None:
            args.out_dir = "."
        return args
    payload = load_manifest(args.from_manifest)
    if payload.get("command") != command:
        raise ValueError(
            f"{args.from_manifest}: manifest records command "
            f"{payload.get('command')!r}, expected {command!r}"
        )
    override_out = args.out_dir
    for key, value in payload.items():
        if key in ("command", "artifact_version", "timestamp"):
            continue
        setattr(args, key, value)
    if override_out is not None:
        args.out_dir = override_out
    if args.out_dir is None:
        args.out_dir = "."
    return args


def _outpath(args: argparse.Namespace, name: str) -> str:
    os.makedirs(args.out_dir, exist_ok=True)
    return os.path.join(args.out_dir, name)


def _write_quality_csv(path: str, quality) -> None:
    with open(path, "w") as fh:
        fh.write(quality.csv_row() + "\n")


# ---------------------------------------------------------------- synth


def run_synth(args: argparse.Namespace) -> int:
    args = _apply_manifest(args, "synth")
    log = _StageLog()
    log("synth: generating scene pair")
    shift = DomainShift.constant(
        args.bands, args.shift_offset, args.shift_gain, args.endmember_sigma
    )
    spec = SceneSpec(
        bands=args.bands,
        rows=args.rows,
        cols=args.cols,
        endmember_count=args.endmembers,
        abundance_sparsity=args.sparsity,
        seed=args.seed,
        shift=shift,
    )
    pair = generate_scene_pair(spec)
    write_cube(pair.source, _outpath(args, "z"), description="synthetic source scene")
    write_cube(pair.target, _outpath(args, "x"), description="synthetic target scene")
    export_matrix_csv(pair.endmembers, _outpath(args, "endmembers.csv"))
    write_manifest(
        _outpath(args, "manifest.json"),
        "synth",
        {
            "bands": args.bands,
            "rows": args.rows,
            "cols": args.cols,
            "endmembers": args.endmembers,
            "sparsity": args.sparsity,
            "seed": args.seed,
            "shift_offset": args.shift_offset,
            "shift_gain": args.shift_gain,
            "endmember_sigma": args.endmember_sigma,
            "out_dir": args.out_dir,
        },
    )
    print(
        f"wrote source cube 'z', target cube 'x' and endmembers.csv to {args.out_dir}"
    )
    return 0


# ---------------------------------------------------------------- degrade


def run_degrade(args: argparse.Namespace) -> int:
    args = _apply_manifest(args, "degrade")
    _require(args, "cube", "srf")
    log = _StageLog()
    log("io: reading inputs")
    cube = read_cube(args.cube)
    srf = read_srf(args.srf)
    log("forward: spectral degradation")
    out = degrade(cube, srf, NoiseSpec(sigma=args.sigma, seed=args.seed))
    write_cube(out, _outpath(args, "y"), description="degraded cube")
    write_manifest(
        _outpath(args, "manifest.json"),
        "degrade",
        {
            "cube": args.cube,
            "srf": args.srf,
            "sigma": args.sigma,
            "seed": args.seed,
            "out_dir": args.out_dir,
        },
    )
    print(f"wrote degraded cube 'y' ({out.bands} bands) to {args.out_dir}")
    return 0


# ---------------------------------------------------------------- learn


def run_learn(args: argparse.Namespace) -> int:
    args = _apply_manifest(args, "learn")
    _require(args, "cube")
    log = _StageLog()
    log("io: reading training cube")
    cube = read_cube(args.cube)
    log("learn: K-SVD dictionary learning")
    result = ksvd(
        cube.as_matrix(),
        KsvdConfig(
            atoms=args.atoms,
            sparsity=OmpConfig(max_atoms=args.sparsity),
            iterations=args.iterations,
            seed=args.seed,
        ),
    )
    write_dictionary(result.dictionary, _outpath(args, "dictionary.csv"))
    write_manifest(
        _outpath(args, "manifest.json"),
        "learn",
        {
            "cube": args.cube,
            "atoms": args.atoms,
            "sparsity": args.sparsity,
            "iterations": args.iterations,
            "seed": args.seed,
            "out_dir": args.out_dir,
        },
    )
    trace = result.residual_trace
    final = f"{trace[-1]:.6g}" if trace else "n/a"
    print(
        f"wrote dictionary.csv ({result.dictionary.atoms} atoms) to {args.out_dir}; "
        f"final residual {final}"
    )
    return 0


# ---------------------------------------------------------------- transfer


def _write_matched_indices(path: str, matched) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["atom", "source_pixel", "target_pixel"])
        for i, (s, t) in enumerate(
            zip(matched.source_pixel_index, matched.target_pixel_index)
        ):
            writer.writerow([i, int(s), int(t)])


def run_transfer(args: argparse.Namespace) -> int:
    args = _apply_manifest(args, "transfer")
    _require(args, "dictionary", "z_cube", "y_cube", "srf")
    log = _StageLog()
    log("io: reading dictionary, cubes and spectral response")
    dict_s = read_dictionary(args.dictionary)
    Z = read_cube(args.z_cube)
    Y = read_cube(args.y_cube)
    srf = read_srf(args.srf)
    log("transfer: compensation + dictionary relearning")
    result = transfer(
        dict_s,
        Z,
        Y,
        srf,
        TransferConfig(
            eta=args.eta,
            k_scale=args.k_scale,
            match_metric=args.metric,
            ksvd=KsvdConfig(
                atoms=dict_s.atoms,
                sparsity=OmpConfig(max_atoms=args.sparsity),
                iterations=args.iterations,
                seed=args.seed,
            ),
        ),
    )
    write_dictionary(result.dictionary, _outpath(args, "d_t.csv"))
    export_matrix_csv(result.compensation.values, _outpath(args, "q_s.csv"))
    _write_matched_indices(_outpath(args, "matched_indices.csv"), result.matched)
    write_manifest(
        _outpath(args, "manifest.json"),
        "transfer",
        {
            "dictionary": args.dictionary,
            "z_cube": args.z_cube,
            "y_cube": args.y_cube,
            "srf": args.srf,
            "eta": args.eta,
            "k_scale": args.k_scale,
            "metric": args.metric,
            "sparsity": args.sparsity,
            "iterations": args.iterations,
            "seed": args.seed,
            "out_dir": args.out_dir,
        },
    )
    q_norm = float(np.linalg.norm(result.compensation.values))
    print(
        f"wrote d_t.csv, q_s.csv and matched_indices.csv to {args.out_dir}; "
        f"||Q||_F = {q_norm:.6g}"
    )
    return 0


# ---------------------------------------------------------------- reconstruct


def run_reconstruct(args: argparse.Namespace) -> int:
    args = _apply_manifest(args, "reconstruct")
    _require(args, "dictionary", "coefficients", "rows", "cols")
    log = _StageLog()
    log("io: reading dictionary and coefficients")
    dictionary = read_dictionary(args.dictionary)
    codes = CoefficientMatrix(values=read_matrix_csv(args.coefficients))
    log("reconstruct: dictionary synthesis")
    cube = reconstruct(dictionary, codes, args.rows, args.cols)
    write_cube(cube, _outpath(args, "xhat"), description="reconstructed cube")
    write_manifest(
        _outpath(args, "manifest.json"),
        "reconstruct",
        {
            "dictionary": args.dictionary,
            "coefficients": args.coefficients,
            "rows": args.rows,
            "cols": args.cols,
            "out_dir": args.out_dir,
        },
    )
    print(f"wrote reconstructed cube 'xhat' ({cube.bands} bands) to {args.out_dir}")
    return 0


# ---------------------------------------------------------------- evaluate


def run_evaluate(args: argparse.Namespace) -> int:
    args = _apply_manifest(args, "evaluate")
    _require(args, "reference", "estimate")
    log = _StageLog()
    log("io: reading cubes")
    reference = read_cube(args.reference)
    estimate = read_cube(args.estimate)
    log("metrics: full-reference evaluation")
    quality = evaluate_quality(reference, estimate, args.ergas_ratio)
    _write_quality_csv(_outpath(args, "quality.csv"), quality)
    write_manifest(
        _outpath(args, "manifest.json"),
        "evaluate",
        {
            "reference": args.reference,
            "estimate": args.estimate,
            "ergas_ratio": args.ergas_ratio,
            "out_dir": args.out_dir,
        },
    )
    print(quality.table())
    return 0


# ---------------------------------------------------------------- pipeline


def run_pipeline_cmd(args: argparse.Namespace) -> int:
    args = _apply_manifest(args, "pipeline")
    _require(args, "z_cube", "srf")
    log = _StageLog()
    if not args.y_cube and not args.x_cube:
        raise ValueError("pipeline needs --y-cube or --x-cube (with --srf) as input")
    log("io: reading cubes and spectral response")
    Z = read_cube(args.z_cube)
    srf = read_srf(args.srf)
    reference = read_cube(args.x_cube) if args.x_cube else None
    if args.y_cube:
        Y = read_cube(args.y_cube)
    else:
        log("forward: degrading ground truth to the observation")
        Y = degrade(reference, srf, NoiseSpec(sigma=args.noise_sigma, seed=args.noise_seed))

    params = PipelineParams(
        atoms=args.atoms,
        sparsity=args.sparsity,
        ksvd_iterations=args.ksvd_iterations,
        seed=args.seed,
        eta=args.eta,
        k_scale=args.k_scale,
        metric=args.metric,
        transfer_iterations=args.transfer_iterations,
        lam=args.lam,
        gamma=args.gamma,
        mu=args.mu,
        admm_iterations=args.admm_iterations,
        primal_tol=args.primal_tol,
        dual_tol=args.dual_tol,
        baseline=args.baseline,
        ergas_ratio=args.ergas_ratio,
    )
    try:
        result = run_pipeline(Z, Y, srf, params, reference=reference, log=log)
    except Exception as e:
        raise RuntimeError(f"{log.current}: {e}") from e

    log("io: writing artifacts")
    write_dictionary(result.dict_source, _outpath(args, "d_s.csv"))
    write_dictionary(result.dict_target, _outpath(args, "d_t.csv"))
    export_matrix_csv(result.compensation.values, _outpath(args, "q_s.csv"))
    export_matrix_csv(result.codes.values, _outpath(args, "a_x.csv"))
    export_matrix_csv(result.codes_matched.values, _outpath(args, "a_u.csv"))
    _write_matched_indices(_outpath(args, "matched_indices.csv"), result.matched)
    write_cube(result.estimate, _outpath(args, "xhat"), description="reconstructed cube")
    result.diagnostics.to_csv(_outpath(args, "admm_diagnostics.csv"))
    if result.quality is not None:
        _write_quality_csv(_outpath(args, "quality.csv"), result.quality)
    write_manifest(
        _outpath(args, "manifest.json"),
        "pipeline",
        {
            "z_cube": args.z_cube,
            "y_cube": args.y_cube,
            "x_cube": args.x_cube,
            "srf": args.srf,
            "noise_sigma": args.noise_sigma,
            "noise_seed": args.noise_seed,
            "atoms": args.atoms,
            "sparsity": args.sparsity,
            "ksvd_iterations": args.ksvd_iterations,
            "seed": args.seed,
            "eta": args.eta,
            "k_scale": args.k_scale,
            "metric": args.metric,
            "transfer_iterations": args.transfer_iterations,
            "lam": args.lam,
            "gamma": args.gamma,
            "mu": args.mu,
            "admm_iterations": args.admm_iterations,
            "primal_tol": args.primal_tol,
            "dual_tol": args.dual_tol,
            "baseline": args.baseline,
            "ergas_ratio": args.ergas_ratio,
            "out_dir": args.out_dir,
        },
    )
    mode = "baseline (no transfer)" if args.baseline else "transferred dictionary"
    print(f"pipeline complete ({mode}); ADMM iterations: {result.diagnostics.iterations}")
    if result.quality is not None:
        print(result.quality.table())
    return 0


# ---------------------------------------------------------------- parser


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--out-dir",
        default=None,
        help="output directory (default: current directory, or the manifest's)",
    )
    parser.add_argument(
        "--from-manifest",
        default=None,
        help="replay a recorded run; other flags are taken from the manifest",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="specsr",
        description="spectral super-resolution via compensated dictionary transfer",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic source/target scene pair")
    p.add_argument("--bands", type=_positive_int, default=31)
    p.add_argument("--rows", type=_positive_int, default=32)
    p.add_argument("--cols", type=_positive_int, default=32)
    p.add_argument("--endmembers", type=_positive_int, default=8)
    p.add_argument("--sparsity", type=_positive_int, default=1,
                   help="nonzero endmembers per pixel")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--shift-offset", type=float, default=0.1)
    p.add_argument("--shift-gain", type=_positive_float, default=1.1)
    p.add_argument("--endmember-sigma", type=_nonnegative_float, default=0.02)
    _add_common(p)
    p.set_defaults(func=run_synth)

    p = sub.add_parser("degrade", help="apply a spectral response to a cube")
    p.add_argument("--cube", help="input cube base path (no extension)")
    p.add_argument("--srf", help="spectral response CSV")
    p.add_argument("--sigma", type=_nonnegative_float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    _add_common(p)
    p.set_defaults(func=run_degrade)

    p = sub.add_parser("learn", help="K-SVD dictionary learning from a cube")
    p.add_argument("--cube", help="training cube base path")
    p.add_argument("--atoms", type=_positive_int, default=_DEFAULTS.atoms)
    p.add_argument("--sparsity", type=_positive_int, default=_DEFAULTS.sparsity)
    p.add_argument("--iterations", type=int, default=_DEFAULTS.ksvd_iterations)
    p.add_argument("--seed", type=int, default=_DEFAULTS.seed)
    _add_common(p)
    p.set_defaults(func=run_learn)

    p = sub.add_parser("transfer", help="transfer a dictionary to the target domain")
    p.add_argument("--dictionary", help="source dictionary CSV")
    p.add_argument("--z-cube", help="source scene cube base path")
    p.add_argument("--y-cube", help="target multispectral cube base path")
    p.add_argument("--srf")
    p.add_argument("--eta", type=_positive_float, default=_DEFAULTS.eta)
    p.add_argument("--k-scale", type=float, default=_DEFAULTS.k_scale)
    p.add_argument("--metric", choices=("euclidean", "spectral_angle"),
                   default=_DEFAULTS.metric)
    p.add_argument("--sparsity", type=_positive_int, default=_DEFAULTS.sparsity)
    p.add_argument("--iterations", type=int, default=_DEFAULTS.transfer_iterations)
    p.add_argument("--seed", type=int, default=_DEFAULTS.seed)
    _add_common(p)
    p.set_defaults(func=run_transfer)

    p = sub.add_parser("reconstruct", help="synthesize a cube from dictionary x codes")
    p.add_argument("--dictionary", help="dictionary CSV")
    p.add_argument("--coefficients", help="coefficient matrix CSV")
    p.add_argument("--rows", type=_positive_int)
    p.add_argument("--cols", type=_positive_int)
    _add_common(p)
    p.set_defaults(func=run_reconstruct)

    p = sub.add_parser("evaluate", help="full-reference quality metrics for two cubes")
    p.add_argument("--reference", help="reference cube base path")
    p.add_argument("--estimate", help="estimate cube base path")
    p.add_argument("--ergas-ratio", type=_positive_float, default=_DEFAULTS.ergas_ratio)
    _add_common(p)
    p.set_defaults(func=run_evaluate)

    p = sub.add_parser("pipeline", help="full reconstruction pipeline")
    p.add_argument("--z-cube", help="similar-scene training cube base path")
    p.add_argument("--y-cube", default=None, help="observed multispectral cube base path")
    p.add_argument("--x-cube", default=None,
                   help="ground-truth cube base path (derives Y when --y-cube absent)")
    p.add_argument("--srf")
    p.add_argument("--noise-sigma", type=_nonnegative_float, default=0.0,
                   help="noise added when deriving Y from --x-cube")
    p.add_argument("--noise-seed", type=int, default=0)
    p.add_argument("--atoms", type=_positive_int, default=_DEFAULTS.atoms)
    p.add_argument("--sparsity", type=_positive_int, default=_DEFAULTS.sparsity)
    p.add_argument("--ksvd-iterations", type=int, default=_DEFAULTS.ksvd_iterations)
    p.add_argument("--seed", type=int, default=_DEFAULTS.seed)
    p.add_argument("--eta", type=_positive_float, default=_DEFAULTS.eta)
    p.add_argument("--k-scale", type=float, default=_DEFAULTS.k_scale)
    p.add_argument("--metric", choices=("euclidean", "spectral_angle"),
                   default=_DEFAULTS.metric)
    p.add_argument("--transfer-iterations", type=int,
                   default=_DEFAULTS.transfer_iterations)
    p.add_argument("--lam", type=_nonnegative_float, default=_DEFAULTS.lam)
    p.add_argument("--gamma", type=_nonnegative_float, default=_DEFAULTS.gamma)
    p.add_argument("--mu", type=_positive_float, default=_DEFAULTS.mu)
    p.add_argument("--admm-iterations", type=_positive_int,
                   default=_DEFAULTS.admm_iterations)
    p.add_argument("--primal-tol", type=_positive_float, default=_DEFAULTS.primal_tol)
    p.add_argument("--dual-tol", type=_positive_float, default=_DEFAULTS.dual_tol)
    p.add_argument("--baseline", action="store_true",
                   help="skip transfer: use the source dictionary directly")
    p.add_argument("--ergas-ratio", type=_positive_float, default=_DEFAULTS.ergas_ratio)
    _add_common(p)
    p.set_defaults(func=run_pipeline_cmd)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # runtime/data error
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
