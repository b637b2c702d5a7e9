"""Command-line surface tying the pipelines together.

Subcommands: calibrate, compress, reconstruct, denoise, metrics, phantom,
info. Exit codes: 0 success, 1 usage error, 2 data/format error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import io as vio
from .admm import AdmmConfig, denoise_ml, denoise_tt
from .calibration import CalibrationTable, calibrate, default_table
from .decomp import TTModel, tt_reconstruct, tucker_reconstruct
from .metrics import cnr, relative_error, segmentation_error, snr
from .phantom import SpeckledPhantomSpec, make_phantom
from .pipeline import despeckle_compress_ml, despeckle_compress_tt
from .prox import SpNorm

__all__ = ["main"]

NORM_CHOICES = [n.value for n in SpNorm]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _cr_list(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated float list: {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty CR list")
    return values


def _build_parser() -> _Parser:
    parser = _Parser(prog="speckless", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("calibrate", help="tune penalties so natural CR hits targets")
    p.add_argument("--mode", required=True, choices=["tt", "ml"])
    p.add_argument("--norm", required=True, choices=NORM_CHOICES)
    p.add_argument("--targets", type=_cr_list, default=None,
                   help="comma-separated CR targets (default: 12 log steps in [1,100])")
    p.add_argument("--out", required=True, help="table file (merged if it exists)")
    p.add_argument("volumes", nargs="+", help="volume files to calibrate on")
    p.set_defaults(handler=_cmd_calibrate)

    p = sub.add_parser("compress", help="de-speckle and compress at a target CR")
    p.add_argument("--mode", required=True, choices=["tt", "ml"])
    p.add_argument("--norm", required=True, choices=NORM_CHOICES)
    p.add_argument("--cr", required=True, type=float)
    p.add_argument("--table", default=None, help="calibration table (default: bundled)")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", dest="outfile", required=True)
    p.add_argument("--decompose-denoised", action="store_true",
                   help="fit the final model to the denoised tensor instead of the input")
    p.set_defaults(handler=_cmd_compress)

    p = sub.add_parser("reconstruct", help="decode a model file back to a volume")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", dest="outfile", required=True)
    p.add_argument("--dtype", choices=["f32", "f64"], default="f32")
    p.set_defaults(handler=_cmd_reconstruct)

    p = sub.add_parser("denoise", help="run the raw ADMM denoiser")
    p.add_argument("--mode", required=True, choices=["tt", "ml"])
    p.add_argument("--norm", required=True, choices=NORM_CHOICES)
    p.add_argument("--mu0", required=True, type=float)
    p.add_argument("--mu-max", required=True, type=float)
    p.add_argument("--eps-r", type=float, default=None)
    p.add_argument("--itmax", type=int, default=100)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", dest="outfile", required=True)
    p.add_argument("--dtype", choices=["f32", "f64"], default="f64")
    p.set_defaults(handler=_cmd_denoise)

    p = sub.add_parser("metrics", help="emit CSV quality measures")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--ref", default=None, help="reference volume for relative error")
    p.add_argument("--region", default=None, help="mask CSV for CNR (and SNR signal)")
    p.add_argument("--background", default=None, help="mask CSV for SNR background")
    p.add_argument("--surfaces", nargs=2, metavar=("AUTO", "MANUAL"), default=None)
    p.add_argument("--bscan-subset", type=_cr_list, default=None,
                   help="comma-separated B-scan indices for the SE average")
    p.set_defaults(handler=_cmd_metrics)

    p = sub.add_parser("phantom", help="generate a synthetic speckled phantom")
    p.add_argument("--dims", nargs=3, type=int, required=True, metavar=("I1", "I2", "I3"))
    p.add_argument("--rank", nargs="+", type=int, required=True,
                   help="2 ints for a TT phantom, 3 for an ML phantom")
    p.add_argument("--looks", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-clean", required=True)
    p.add_argument("--out-noisy", required=True)
    p.add_argument("--dtype", choices=["f32", "f64"], default="f64")
    p.set_defaults(handler=_cmd_phantom)

    p = sub.add_parser("info", help="print container header metadata")
    p.add_argument("--in", dest="infile", required=True)
    p.set_defaults(handler=_cmd_info)

    return parser


def _load_table(path):
    return default_table() if path is None else CalibrationTable.load(path)


def _cmd_calibrate(args) -> int:
    volumes = [vio.read_volume(p) for p in args.volumes]
    try:
        table = CalibrationTable.load(args.out)
    except FileNotFoundError:
        table = CalibrationTable()
    kwargs = {} if args.targets is None else {"cr_targets": args.targets}
    calibrate(volumes, args.mode, SpNorm(args.norm), table=table, **kwargs)
    table.save(args.out)
    return 0


def _cmd_compress(args) -> int:
    if not args.cr > 1:
        raise _UsageError(f"--cr must exceed 1, got {args.cr}")
    volume = vio.read_volume(args.infile)
    run = despeckle_compress_tt if args.mode == "tt" else despeckle_compress_ml
    outcome = run(
        volume,
        args.cr,
        SpNorm(args.norm),
        _load_table(args.table),
        decompose_denoised=args.decompose_denoised,
    )
    vio.write_model(outcome.model, args.outfile, norm=SpNorm(args.norm))
    print(
        f"achieved_cr={outcome.achieved_cr:.6g} "
        f"approx_error={outcome.approx_error:.6g} "
        f"iterations={outcome.admm_trace.iterations} "
        f"converged={outcome.admm_trace.converged}"
    )
    return 0


def _cmd_reconstruct(args) -> int:
    model = vio.read_model(args.infile)
    recon = tt_reconstruct(model) if isinstance(model, TTModel) else tucker_reconstruct(model)
    vio.write_volume(recon, args.outfile, dtype=args.dtype)
    return 0


def _cmd_denoise(args) -> int:
    volume = vio.read_volume(args.infile)
    cfg = AdmmConfig(
        mu0=args.mu0,
        mu_max=args.mu_max,
        norm=SpNorm(args.norm),
        eps_r=args.eps_r,
        itmax=args.itmax,
    )
    if args.mode == "tt":
        out, trace = denoise_tt(volume, cfg)
        rank_note = ""
    else:
        out, trace, ml_rank = denoise_ml(volume, cfg)
        rank_note = f" ml_rank={','.join(str(r) for r in ml_rank.ranks)}"
    vio.write_volume(out, args.outfile, dtype=args.dtype)
    print(f"iterations={trace.iterations} converged={trace.converged}{rank_note}")
    return 0


def _cmd_metrics(args) -> int:
    volume = vio.read_volume(args.infile)
    rel = err_cnr = err_snr = se = ""
    if args.ref is not None:
        rel = f"{relative_error(vio.read_volume(args.ref), volume):.10g}"
    region = None
    if args.region is not None:
        region = vio.read_mask_csv(args.region, volume.dims)
        err_cnr = f"{cnr(volume, region):.10g}"
    if args.background is not None:
        if region is None:
            raise _UsageError("--background requires --region (the SNR signal mask)")
        background = vio.read_mask_csv(args.background, volume.dims)
        err_snr = f"{snr(volume, region, background):.10g}"
    if args.surfaces is not None:
        auto = vio.read_surfaces_csv(args.surfaces[0])
        manual = vio.read_surfaces_csv(args.surfaces[1])
        subset = None
        if args.bscan_subset is not None:
            subset = [int(b) for b in args.bscan_subset]
        se = f"{segmentation_error(auto, manual, bscan_subset=subset):.10g}"
    print("relative_error,cnr,snr,se")
    print(f"{rel},{err_cnr},{err_snr},{se}")
    return 0


def _cmd_phantom(args) -> int:
    if len(args.rank) not in (2, 3):
        raise _UsageError("--rank takes 2 ints (TT phantom) or 3 ints (ML phantom)")
    kind = "tt" if len(args.rank) == 2 else "ml"
    spec = SpeckledPhantomSpec(
        dims=tuple(args.dims),
        kind=kind,
        ranks=tuple(args.rank),
        looks=args.looks,
        seed=args.seed,
    )
    clean, noisy = make_phantom(spec)
    vio.write_volume(clean, args.out_clean, dtype=args.dtype)
    vio.write_volume(noisy, args.out_noisy, dtype=args.dtype)
    return 0


def _cmd_info(args) -> int:
    info = vio.read_header(args.infile)
    for key, value in info.items():
        if isinstance(value, SpNorm):
            value = value.value
        elif isinstance(value, tuple):
            value = "x".join(str(v) for v in value)
        print(f"{key}: {value}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "handler", None) is None:
            raise _UsageError("a subcommand is required (see --help)")
    except _UsageError as err:
        print(f"speckless: error: {err}", file=sys.stderr)
        return 1
    try:
        return args.handler(args)
    except _UsageError as err:
        print(f"speckless: error: {err}", file=sys.stderr)
        return 1
    except vio.FileFormatError as err:
        print(f"speckless: {type(err).__name__}: {err}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError) as err:
        print(f"speckless: data error: {err}", file=sys.stderr)
        return 2
    except (np.linalg.LinAlgError, ArithmeticError) as err:
        print(f"speckless: numerical failure: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
