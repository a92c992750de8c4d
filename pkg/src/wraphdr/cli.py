"""Command-line interface.

Subcommands: ``scene``, ``encode``, ``decode``, ``dataset``, ``eval`` and
``analyze``.  Exit status: 0 success, 1 invalid data, 2 bad arguments,
3 file I/O or format errors, 4 solver capacity exceeded under ``--strict``.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .codec import CodecParams, Encoding, encode
from .dataset import AugmentConfig, default_threads, log_histogram, synthesize_dataset, write_dataset
from .hdrio import HdrFormatError, read_hdr, read_sensor_png, write_pfm, write_sensor_png, write_winding_png
from .metrics import evaluate, psnr, wrap_count
from .recoverability import check_recoverable, max_dynamic_range
from .scenes import SceneKind, SceneSpec, generate_scene
from .solvers import MrfConfig, Solver, decode

EXIT_OK = 0
EXIT_DATA = 1
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_CAPACITY = 4

HDR_SUFFIXES = (".pfm", ".hdr", ".pic", ".rgbe")

log = logging.getLogger("wraphdr")


class CapacityError(RuntimeError):
    pass


def _dump(obj, path=None):
    text = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _fmt(x):
    if x is None:
        return None
    if isinstance(x, float) and np.isinf(x):
        return "inf"
    return float(x)


def _add_codec_flags(p):
    g = p.add_argument_group("encoding")
    g.add_argument("--kind", choices=[e.value for e in Encoding], default="mantissa")
    g.add_argument("--alpha", type=float, default=2.0)
    g.add_argument("--imax", type=float, default=1.0)
    g.add_argument("--bits", type=int, default=0, help="quantizer depth, 0 disables")
    g.add_argument("--noise-sigma", type=float, default=0.0)
    g.add_argument("--seed", type=int, default=0)


def _add_solver_flags(p):
    g = p.add_argument_group("solver")
    g.add_argument("--solver", choices=[s.value for s in Solver], default="floodfill")
    g.add_argument("--tau", type=float, default=None, help="wrap edge threshold (default imax/2)")
    g.add_argument("--max-label", type=int, default=16)
    g.add_argument("--lam", type=float, default=1.0)
    g.add_argument("--trunc", type=float, default=None, help="default 2*imax")
    g.add_argument("--max-sweeps", type=int, default=5)
    g.add_argument("--strict", action="store_true", help="exit 4 when the winding ceiling is hit")


def _codec_params(args):
    return CodecParams(kind=args.kind, alpha=args.alpha, i_max=args.imax, bits=args.bits,
                       noise_sigma=args.noise_sigma, seed=args.seed)


def build_parser():
    parser = argparse.ArgumentParser(prog="wraphdr", description="Wrapped-sensor HDR encoding and decoding.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scene", help="render an analytic scene to PFM")
    p.add_argument("output")
    p.add_argument("--kind", choices=[k.value for k in SceneKind if k is not SceneKind.FROM_FILE],
                   default="gaussian")
    p.add_argument("--amplitude", type=float, default=16.0)
    p.add_argument("--size", type=int, nargs=2, metavar=("H", "W"), default=(129, 129))
    p.add_argument("--sigma", type=float, default=24.0)
    p.add_argument("--center", type=float, nargs=2, metavar=("CY", "CX"), default=None)
    p.add_argument("--slope", type=float, default=0.4)
    p.add_argument("--slope-y", type=float, default=0.0)
    p.add_argument("--offset", type=float, default=0.0)
    p.add_argument("--n", type=int, default=6, help="samples for ramp1d")
    p.add_argument("--component", type=float, nargs=4, action="append", default=[],
                   metavar=("A", "CY", "CX", "SIGMA"), help="gaussian_mixture component")

    p = sub.add_parser("encode", help="simulate the wrapping sensor")
    p.add_argument("input", help="HDR image (PFM or Radiance RGBE)")
    p.add_argument("outdir")
    _add_codec_flags(p)

    p = sub.add_parser("decode", help="recover irradiance from a sensor PNG")
    p.add_argument("sensor", help="sensor PNG written by 'encode' (sidecar .json next to it)")
    p.add_argument("-o", "--output", required=True, help="output PFM")
    p.add_argument("--report", default=None, help="JSON report path (default stdout)")
    p.add_argument("--reference", default=None, help="ground-truth HDR for a PSNR entry")
    _add_solver_flags(p)

    p = sub.add_parser("dataset", help="synthesize training records from an HDR folder")
    p.add_argument("src_dir")
    p.add_argument("outdir")
    _add_codec_flags(p)
    p.add_argument("--exposure-factors", type=float, nargs="+", default=[1.0, 2.0, 4.0, 8.0])
    p.add_argument("--crop", type=int, nargs=2, metavar=("H", "W"), default=(256, 256))
    p.add_argument("--crops-per-image", type=int, default=1)
    p.add_argument("--threads", type=int, default=None, help="default: $WRAPHDR_THREADS or 1")

    p = sub.add_parser("eval", help="compare a reconstruction with ground truth")
    p.add_argument("pred")
    p.add_argument("gt")
    p.add_argument("--peak", type=float, default=None, help="PSNR peak (default: max of gt)")
    p.add_argument("-o", "--output", default=None, help="append a JSON line here instead of stdout")

    p = sub.add_parser("analyze", help="recoverability, histogram, wrap counts and dynamic range")
    p.add_argument("input")
    p.add_argument("-o", "--output", default=None, help="TSV output (default stdout)")
    p.add_argument("--bins", type=int, default=32)
    p.add_argument("--dr-n", type=int, nargs="*", default=[256])
    _add_codec_flags(p)
    return parser


def _validate(args, parser):
    # reject bad combinations before touching any file
    try:
        if hasattr(args, "kind") and args.command in ("encode", "dataset", "analyze"):
            _codec_params(args)
        if args.command == "decode":
            MrfConfig(max_label=args.max_label, lam=args.lam, trunc=args.trunc or 1.0,
                      max_sweeps=args.max_sweeps)
            if args.tau is not None and args.tau <= 0:
                raise ValueError("--tau must be > 0")
        if args.command == "dataset":
            AugmentConfig(tuple(args.exposure_factors), tuple(args.crop), args.crops_per_image, args.seed)
            if args.threads is not None and args.threads < 1:
                raise ValueError("--threads must be >= 1")
        if args.command == "analyze" and args.bins < 2:
            raise ValueError("--bins must be >= 2")
    except ValueError as exc:
        parser.error(str(exc))


def cmd_scene(args):
    spec = SceneSpec(kind=args.kind, amplitude=args.amplitude, size=tuple(args.size), sigma=args.sigma,
                     center=tuple(args.center) if args.center else None, slope=args.slope,
                     slope_y=args.slope_y, offset=args.offset, n=args.n,
                     components=tuple(tuple(c) for c in args.component))
    img = generate_scene(spec)
    write_pfm(img if img.ndim > 1 else img[None, :], args.output)
    return EXIT_OK


def cmd_encode(args):
    params = _codec_params(args)
    img = read_hdr(args.input)
    sensor, winding = encode(img, params)
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    write_sensor_png(sensor, out / "sensor.png")
    write_winding_png(winding, out / "winding.png")
    meta = {
        "params": params.to_dict(),
        "shape": list(sensor.shape),
        "source": str(args.input),
        "sensor": "sensor.png",
        "winding": "winding.png",
        "max_winding": int(winding.max()),
        "wrap_count": wrap_count(winding),
    }
    _dump(meta, out / "sensor.json")
    return EXIT_OK


def _sidecar(sensor_path):
    side = Path(sensor_path).with_suffix(".json")
    if not side.exists():
        raise FileNotFoundError(f"missing sidecar metadata {side} for {sensor_path}")
    return side, json.loads(side.read_text())


def cmd_decode(args):
    side, meta = _sidecar(args.sensor)
    params = CodecParams.from_dict(meta["params"])
    sensor = read_sensor_png(args.sensor, params)
    trunc = 2.0 * params.i_max if args.trunc is None else args.trunc
    config = MrfConfig(max_label=args.max_label, lam=args.lam, trunc=trunc, max_sweeps=args.max_sweeps)
    img, winding, rep = decode(sensor, args.solver, config, args.tau, return_report=True)
    write_pfm(img, args.output)
    report = {"solver": args.solver, "sidecar": str(side), "output": str(args.output),
              "max_winding": int(winding.max()), "wrap_count": wrap_count(winding)}
    capacity = False
    if args.solver == "floodfill":
        report.update(conflicts=rep.conflicts, components=rep.components, shifted=rep.shifted)
    else:
        report.update(initial_energy=rep.initial_energy, energy=rep.energy, sweeps=rep.sweeps,
                      clipped=rep.clipped, at_ceiling=rep.at_ceiling, residual_edges=rep.residual_edges,
                      conflicts=rep.floodfill.conflicts if rep.floodfill else None,
                      max_label=config.max_label)
        capacity = rep.capacity_exceeded
    report["capacity_exceeded"] = capacity
    if args.reference:
        ref = read_hdr(args.reference)
        report["psnr_db"] = _fmt(psnr(ref, img.reshape(ref.shape)))
    _dump(report, args.report)
    if capacity and args.strict:
        raise CapacityError(f"winding ceiling {config.max_label} exceeded")
    return EXIT_OK


def cmd_dataset(args):
    params = _codec_params(args)
    aug = AugmentConfig(tuple(args.exposure_factors), tuple(args.crop), args.crops_per_image, args.seed)
    src = Path(args.src_dir)
    if not src.is_dir():
        raise FileNotFoundError(f"source directory {src} not found")
    files = sorted(p for p in src.iterdir() if p.suffix.lower() in HDR_SUFFIXES)
    records = synthesize_dataset(files, params, aug, threads=args.threads or default_threads())
    manifest = write_dataset(records, args.outdir)
    n = sum(1 for _ in open(manifest))
    sys.stdout.write(f"{n} records -> {manifest}\n")
    return EXIT_OK


def cmd_eval(args):
    pred = read_hdr(args.pred)
    gt = read_hdr(args.gt)
    if pred.shape != gt.shape:
        raise ValueError(f"dimension mismatch: pred {pred.shape} vs gt {gt.shape}")
    rep = evaluate(pred, gt, peak=args.peak)
    line = {"pred": str(args.pred), "gt": str(args.gt), **rep.to_dict()}
    text = json.dumps(line, sort_keys=True) + "\n"
    if args.output:
        with open(args.output, "a") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def analyze_rows(img, params, bins=32, dr_n=(256,)):
    """Plot-ready sections as lists of tab-separated rows."""
    lines = []
    modulo = params.replace(kind=Encoding.MODULO, noise_sigma=0.0, bits=0)
    mantissa = params.replace(kind=Encoding.MANTISSA, noise_sigma=0.0, bits=0) if params.i_max >= 1 else None

    lines.append("# recoverability")
    lines.append("encoding\ttotal_pairs\tviolations\tsatisfied")
    for name, p in (("modulo", modulo), ("mantissa", mantissa)):
        if p is None:
            continue
        rep = check_recoverable(img, p)
        lines.append(f"{name}\t{rep.total_pairs}\t{rep.n_violations}\t{int(rep.satisfied)}")

    lines.append("# log_histogram")
    counts, zeros, edges = log_histogram(img, bins)
    lines.append("bin\tlog10_lo\tlog10_hi\t" + "\t".join(f"ch{c}" for c in range(counts.shape[0])))
    lines.append("zero\t\t\t" + "\t".join(str(int(z)) for z in zeros))
    if edges is not None:
        for i in range(bins):
            lines.append(f"{i}\t{edges[i]:.6g}\t{edges[i + 1]:.6g}\t" + "\t".join(str(int(c)) for c in counts[:, i]))

    lines.append("# wrap_count")
    lines.append("encoding\tmax_winding\twrap_count")
    for name, p in (("modulo", modulo), ("mantissa", mantissa)):
        if p is None:
            continue
        _, w = encode(img, p)
        lines.append(f"{name}\t{int(w.max())}\t{wrap_count(w)}")

    lines.append("# dynamic_range")
    lines.append("encoding\tn_pixels\ti_max\tdr_db")
    shape = np.shape(img)
    ns = list(dict.fromkeys([max(shape[1] if len(shape) > 1 else shape[0], 2), *dr_n]))
    for n in ns:
        for kind in Encoding:
            try:
                dr = max_dynamic_range(kind, n, params.i_max)
                lines.append(f"{kind.value}\t{n}\t{params.i_max:g}\t{dr.dr_db:.4f}")
            except ValueError:
                lines.append(f"{kind.value}\t{n}\t{params.i_max:g}\trejected")
    return lines


def cmd_analyze(args):
    params = _codec_params(args)
    img = read_hdr(args.input)
    text = "\n".join(analyze_rows(img, params, args.bins, args.dr_n)) + "\n"
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {
    "scene": cmd_scene,
    "encode": cmd_encode,
    "decode": cmd_decode,
    "dataset": cmd_dataset,
    "eval": cmd_eval,
    "analyze": cmd_analyze,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    _validate(args, parser)
    try:
        return COMMANDS[args.command](args)
    except CapacityError as exc:
        log.error("%s", exc)
        return EXIT_CAPACITY
    except (OSError, HdrFormatError) as exc:
        log.error("%s", exc)
        return EXIT_IO
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
