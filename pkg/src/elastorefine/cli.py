"""Command-line pipeline: phantom -> strain -> epr -> clip/guo/refine -> metrics/hist/render.

Stages exchange EFG1 grids through directories with fixed file names:

* displacement directory: ``axial.efg``, ``lateral.efg``
* strain directory: ``eps11.efg``, ``eps22.efg``

Every run writes a JSON manifest with the fully resolved argument list, the
SHA-256 of each output and a trace summary. ``replay`` re-executes a single
run manifest or a pipeline manifest (``{"steps": [{"argv": [...]}, ...]}``)
and checks output hashes when the manifest records them.

Exit codes: 0 success, 2 usage/parameter error, 3 data/format error,
4 degenerate statistics.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from pathlib import Path

from . import __version__
from .epr import (DEFAULT_BETA, DEFAULT_FLOOR, DEFAULT_LAMBDA_VS, FeasibilityBounds, compute_epr,
                  feasibility_mask, picture_loss)
from .errors import DegenerateStatisticsError, DimensionError, FormatError, ParameterError
from .grid import GridGeometry, StrainPair, compute_strains, DisplacementField
from .io import read_grid, render_pgm, write_grid, write_histogram_csv
from .known_ops import ClipperConfig, GuoConfig, RefinementTrace, guo_refine, kpicture_refine, poisson_clipper
from .metrics import DEFAULT_HIST_BINS, DEFAULT_HIST_RANGE, RoiSpec, cnr, epr_histogram, incompressibility_residual, roi_stats, sr
from .phantom import DEFAULT_GEOMETRY, Inclusion, PhantomSpec, generate, perturb_epr

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DEGENERATE = 0, 2, 3, 4

DISPLACEMENT_FILES = ("axial.efg", "lateral.efg")
STRAIN_FILES = ("eps11.efg", "eps22.efg")
PATH_FLAGS = ("--in", "--out")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _float_pair(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected 'lo,hi', got {text!r}")
    return float(parts[0]), float(parts[1])


def _roi(text: str) -> RoiSpec:
    try:
        return RoiSpec.parse(text)
    except (ParameterError, DimensionError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _inclusion(text: str) -> Inclusion:
    parts = [float(p) for p in text.split(",")]
    if not 3 <= len(parts) <= 5:
        raise argparse.ArgumentTypeError(
            f"inclusion must be 'axial_mm,lateral_mm,radius_mm[,contrast[,softness_mm]]', got {text!r}")
    return Inclusion(*parts)


# -- shared flag groups -------------------------------------------------------

def _add_bounds(p):
    p.add_argument("--vmin", type=float, default=0.1, help="lower feasible EPR bound (default: %(default)s)")
    p.add_argument("--vmax", type=float, default=0.6, help="upper feasible EPR bound (default: %(default)s)")
    p.add_argument("--floor", type=float, default=DEFAULT_FLOOR,
                   help="axial strain magnitude below which EPR is degenerate (default: %(default)s)")


def _add_clip(p, prefix=""):
    p.add_argument(f"--{prefix}iterations", type=int, default=10,
                   help="clipper iterations (default: %(default)s)")
    p.add_argument("--tol", type=float, default=None,
                   help="early stop when the max lateral update (mm) drops below this (default: off)")
    p.add_argument("--literal-sign", action="store_true",
                   help="integrate epr*eps11 without sign flip or lateral spacing (as printed in the "
                        "original pseudo-code) instead of -epr*eps11*lateral_spacing")


def _add_guo(p, prefix=""):
    p.add_argument(f"--{prefix}iterations", type=int, default=100,
                   help="relaxation iterations (default: %(default)s)")
    p.add_argument("--lambda1", type=float, default=0.1, help="momentum weight (default: %(default)s)")
    p.add_argument("--lambda2", type=float, default=0.1,
                   help="step size; stencils are in index units so this absorbs grid spacing "
                        "(default: %(default)s)")
    p.add_argument("--sigma", type=float, default=1.0,
                   help="Gaussian sigma in samples applied after every step (default: %(default)s)")
    p.add_argument("--stencil", choices=("corrected", "paper-literal"), default="corrected",
                   help="mixed-derivative stencil for the axial term (default: %(default)s)")
    p.add_argument("--gauss-boundary", choices=("linear", "replicate"), default="linear",
                   help="Gaussian padding inside the relaxation (default: %(default)s)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="elastorefine", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("phantom", help="generate a synthetic displacement phantom")
    p.add_argument("--rows", type=int, default=DEFAULT_GEOMETRY.rows, help="axial samples (default: %(default)s)")
    p.add_argument("--cols", type=int, default=DEFAULT_GEOMETRY.cols, help="lateral lines (default: %(default)s)")
    p.add_argument("--axial-spacing", type=float, default=DEFAULT_GEOMETRY.axial_spacing,
                   help="mm per axial sample (default: %(default)s)")
    p.add_argument("--lateral-spacing", type=float, default=DEFAULT_GEOMETRY.lateral_spacing,
                   help="mm per lateral line (default: %(default)s)")
    p.add_argument("--eps0", type=float, default=0.02, help="applied axial compression (default: %(default)s)")
    p.add_argument("--nu", type=float, default=0.5, help="Poisson's ratio in [0, 0.5] (default: %(default)s)")
    p.add_argument("--inclusion", type=_inclusion, action="append", default=[],
                   metavar="A,L,R[,C[,S]]",
                   help="inclusion centre (axial, lateral mm), radius mm, strain contrast (0.5), "
                        "edge softness mm (0); repeatable")
    p.add_argument("--noise-axial", type=float, default=0.0, help="axial displacement noise std, mm (default: %(default)s)")
    p.add_argument("--noise-lateral", type=float, default=0.0, help="lateral displacement noise std, mm (default: %(default)s)")
    p.add_argument("--seed", type=int, default=0, help="random seed (default: %(default)s)")
    p.add_argument("--perturb-fraction", type=float, default=0.0,
                   help="fraction of pixels whose EPR is shifted (default: %(default)s)")
    p.add_argument("--perturb-magnitude", type=float, default=0.0,
                   help="EPR shift applied to perturbed pixels (default: %(default)s)")
    p.add_argument("--perturb-symmetric", action="store_true", help="random sign for each EPR shift")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("strain", help="differentiate displacements into eps11/eps22")
    p.add_argument("--in", dest="inp", required=True, help="displacement directory")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("epr", help="EPR grid, feasibility mask and loss report")
    p.add_argument("--in", dest="inp", required=True, help="strain or displacement directory")
    _add_bounds(p)
    p.add_argument("--beta", type=float, default=DEFAULT_BETA, help="lateral smoothness weight (default: %(default)s)")
    p.add_argument("--lambda-vs", type=float, default=DEFAULT_LAMBDA_VS,
                   help="smoothness loss weight (default: %(default)s)")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("clip", help="Poisson's ratio clipper")
    p.add_argument("--in", dest="inp", required=True, help="displacement directory")
    _add_bounds(p)
    _add_clip(p)
    p.add_argument("--out", required=True, help="output displacement directory")

    p = sub.add_parser("guo", help="incompressibility relaxation with Gaussian smoothing")
    p.add_argument("--in", dest="inp", required=True, help="displacement directory")
    _add_bounds(p)
    _add_guo(p)
    p.add_argument("--out", required=True, help="output displacement directory")

    p = sub.add_parser("refine", help="clipper followed by the incompressibility relaxation")
    p.add_argument("--in", dest="inp", required=True, help="displacement directory")
    _add_bounds(p)
    _add_clip(p, prefix="clip-")
    _add_guo(p, prefix="guo-")
    p.add_argument("--order", default="clipper,guo", help="comma-separated operator order (default: %(default)s)")
    p.add_argument("--out", required=True, help="output displacement directory")

    p = sub.add_parser("metrics", help="CNR, SR and incompressibility residual")
    p.add_argument("--in", dest="inp", required=True, help="strain or displacement directory")
    p.add_argument("--field", choices=("eps22", "eps11"), default="eps22",
                   help="grid used for CNR/SR (default: %(default)s)")
    p.add_argument("--roi-t", type=_roi, help="target ROI r0,c0,h,w")
    p.add_argument("--roi-b", type=_roi, help="background ROI r0,c0,h,w")
    p.add_argument("--roi", type=_roi, action="append", default=[],
                   help="r0,c0,h,w; given twice it means target then background")
    p.add_argument("--out", help="JSON report path (default: <in>/metrics.json)")

    p = sub.add_parser("hist", help="EPR histogram as CSV")
    p.add_argument("--in", dest="inp", required=True, help="strain or displacement directory")
    _add_bounds(p)
    p.add_argument("--bins", type=int, default=DEFAULT_HIST_BINS, help="bin count (default: %(default)s)")
    p.add_argument("--range", type=_float_pair, default=DEFAULT_HIST_RANGE, metavar="LO,HI",
                   help="histogram range (default: -0.5,1.5)")
    p.add_argument("--out", required=True, help="CSV path")

    p = sub.add_parser("render", help="render a grid as an 8-bit PGM")
    p.add_argument("--in", dest="inp", required=True, help="EFG1 grid file")
    p.add_argument("--norm", choices=("minmax", "fixed"), default="minmax",
                   help="intensity normalization (default: %(default)s)")
    p.add_argument("--lo", type=float, default=None, help="value mapped to 0 with --norm fixed")
    p.add_argument("--hi", type=float, default=None, help="value mapped to 255 with --norm fixed")
    p.add_argument("--out", required=True, help="PGM path")

    p = sub.add_parser("replay", help="re-run a run manifest or pipeline manifest")
    p.add_argument("manifest", help="manifest JSON path")
    p.add_argument("--workdir", default=None,
                   help="directory that relative --in/--out paths are resolved against (default: cwd)")
    return parser


# -- helpers -------------------------------------------------------------------

def _bounds(args) -> FeasibilityBounds:
    return FeasibilityBounds(args.vmin, args.vmax)


def _read_displacements(directory) -> DisplacementField:
    d = Path(directory)
    if not all((d / name).is_file() for name in DISPLACEMENT_FILES):
        raise FormatError(f"{d} does not contain {' and '.join(DISPLACEMENT_FILES)}")
    return DisplacementField(read_grid(d / "axial.efg"), read_grid(d / "lateral.efg"))


def _read_strains(directory) -> StrainPair:
    d = Path(directory)
    if all((d / name).is_file() for name in STRAIN_FILES):
        return StrainPair(read_grid(d / "eps11.efg"), read_grid(d / "eps22.efg"))
    if all((d / name).is_file() for name in DISPLACEMENT_FILES):
        return compute_strains(_read_displacements(d))
    raise FormatError(f"{d} contains neither strain ({', '.join(STRAIN_FILES)}) "
                      f"nor displacement ({', '.join(DISPLACEMENT_FILES)}) grids")


def _write_displacements(field: DisplacementField, directory) -> list[Path]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_grid(field.axial, d / "axial.efg")
    write_grid(field.lateral, d / "lateral.efg")
    return [d / "axial.efg", d / "lateral.efg"]


def _write_trace(trace: RefinementTrace, path: Path) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["operator", "iteration", "out_of_range_fraction", "residual_l2", "max_update"])
        for r in trace:
            w.writerow([r.operator, r.iteration, repr(r.out_of_range_fraction), repr(r.residual_l2),
                        repr(r.max_update)])
    return path


def _write_json(obj, path: Path) -> Path:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


def _sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _resolved_argv(parser: argparse.ArgumentParser, args) -> list[str]:
    """Rebuild an argv with every option spelled out, defaults included."""
    sub_action = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    sub = sub_action.choices[args.command]
    argv = [args.command]
    for action in sub._actions:
        if isinstance(action, argparse._HelpAction) or not action.option_strings:
            continue
        value = getattr(args, action.dest)
        flag = action.option_strings[0]
        if isinstance(action, argparse._StoreTrueAction):
            if value:
                argv.append(flag)
        elif isinstance(action, argparse._AppendAction):
            for item in value:
                argv += [flag, _format_value(item)]
        elif value is not None:
            argv += [flag, _format_value(value)]
    for action in sub._actions:
        if not action.option_strings and not isinstance(action, argparse._HelpAction):
            argv.append(str(getattr(args, action.dest)))
    return argv


def _format_value(value) -> str:
    if isinstance(value, Inclusion):
        return ",".join(repr(float(x)) for x in (value.center_axial, value.center_lateral, value.radius,
                                                  value.strain_contrast, value.edge_softness))
    if isinstance(value, tuple):
        return ",".join(repr(float(x)) for x in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _jsonable(value):
    if value is None or isinstance(value, (bool, int, float, str)):
        return value
    if isinstance(value, list):
        return [_jsonable(v) for v in value]
    return _format_value(value)


def _echo_numeric(args):
    items = [(k, v) for k, v in sorted(vars(args).items())
             if isinstance(v, (int, float)) and not isinstance(v, bool)]
    if items:
        print("resolved: " + " ".join(f"{k}={v!r}" for k, v in items), file=sys.stderr)


# -- subcommands ---------------------------------------------------------------

def cmd_phantom(args):
    geometry = GridGeometry(args.rows, args.cols, args.axial_spacing, args.lateral_spacing)
    spec = PhantomSpec(geometry, args.eps0, args.nu, tuple(args.inclusion), args.noise_axial,
                       args.noise_lateral, args.seed)
    ph = generate(spec)
    noisy = ph.noisy
    extra = {}
    if args.perturb_fraction > 0:
        noisy, idx = perturb_epr(noisy, args.perturb_fraction, args.perturb_magnitude,
                                 seed=args.seed, symmetric=args.perturb_symmetric)
        extra["perturbed_pixels"] = int(len(idx))
    out = Path(args.out)
    outputs = _write_displacements(noisy, out)
    for name, grid in (("clean_axial.efg", ph.clean.axial), ("clean_lateral.efg", ph.clean.lateral),
                       ("true_eps11.efg", ph.clean_strains.axial), ("true_eps22.efg", ph.clean_strains.lateral)):
        write_grid(grid, out / name)
        outputs.append(out / name)
    return outputs, out / "manifest.json", extra


def cmd_strain(args):
    strains = compute_strains(_read_displacements(args.inp))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_grid(strains.axial, out / "eps11.efg")
    write_grid(strains.lateral, out / "eps22.efg")
    return [out / "eps11.efg", out / "eps22.efg"], out / "manifest.json", {}


def cmd_epr(args):
    strains = _read_strains(args.inp)
    bounds = _bounds(args)
    epr = compute_epr(strains, args.floor, bounds)
    mask = feasibility_mask(epr, bounds)
    report = picture_loss(strains, bounds, args.beta, args.lambda_vs, args.floor)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_grid(epr.values, out / "epr.efg")
    write_grid(mask.values, out / "mask.efg")
    loss = report.as_dict()
    loss["degenerate_pixels"] = int(epr.degenerate.sum())
    _write_json(loss, out / "loss.json")
    print(json.dumps(loss, sort_keys=True))
    return [out / "epr.efg", out / "mask.efg", out / "loss.json"], out / "manifest.json", {"loss": loss}


def _clipper_config(args, iterations) -> ClipperConfig:
    return ClipperConfig(_bounds(args), iterations, args.floor, args.tol, args.literal_sign)


def _guo_config(args, iterations) -> GuoConfig:
    return GuoConfig(iterations, args.lambda1, args.lambda2, args.sigma, args.stencil.replace("-", "_"),
                     args.gauss_boundary, _bounds(args), args.floor)


def _finish_refinement(field, trace, args):
    out = Path(args.out)
    outputs = _write_displacements(field, out)
    outputs.append(_write_trace(trace, out / "trace.csv"))
    return outputs, out / "manifest.json", {"trace": trace.summary()}


def cmd_clip(args):
    field, trace = poisson_clipper(_read_displacements(args.inp), _clipper_config(args, args.iterations))
    return _finish_refinement(field, trace, args)


def cmd_guo(args):
    field, trace = guo_refine(_read_displacements(args.inp), _guo_config(args, args.iterations))
    return _finish_refinement(field, trace, args)


def cmd_refine(args):
    order = [s.strip() for s in args.order.split(",") if s.strip()]
    field, trace = kpicture_refine(_read_displacements(args.inp), _clipper_config(args, args.clip_iterations),
                                   _guo_config(args, args.guo_iterations), order)
    return _finish_refinement(field, trace, args)


def cmd_metrics(args):
    target, background = args.roi_t, args.roi_b
    rois = list(args.roi)
    if target is None and rois:
        target = rois.pop(0)
    if background is None and rois:
        background = rois.pop(0)
    if target is None or background is None:
        raise UsageError("metrics needs a target and a background ROI (--roi-t/--roi-b or --roi twice)")
    strains = _read_strains(args.inp)
    grid = strains.lateral if args.field == "eps22" else strains.axial
    t, b = roi_stats(grid, target), roi_stats(grid, background)
    _, residual = incompressibility_residual(strains)
    result = {
        "field": args.field,
        "roi_target": str(target), "roi_background": str(background),
        "target_mean": t.mean, "target_std": t.std,
        "background_mean": b.mean, "background_std": b.std,
        "cnr": cnr(t, b), "sr": sr(t, b),
        "incompressibility_residual_l2": residual,
    }
    print(f"CNR {result['cnr']!r}")
    print(f"SR {result['sr']!r}")
    print(f"residual_l2 {residual!r}")
    out = Path(args.out) if args.out else Path(args.inp) / "metrics.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_json(result, out)
    return [out], out.with_name(out.name + ".manifest.json"), {"metrics": result}


def cmd_hist(args):
    bounds = _bounds(args)
    epr = compute_epr(_read_strains(args.inp), args.floor, bounds)
    hist = epr_histogram(epr, bounds, args.bins, args.range)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_histogram_csv(hist, out)
    print(f"in_range_fraction {hist.in_range_fraction!r}")
    return [out], out.with_name(out.name + ".manifest.json"), {"in_range_fraction": hist.in_range_fraction}


def cmd_render(args):
    if args.norm == "fixed" and (args.lo is None or args.hi is None):
        raise UsageError("--norm fixed needs --lo and --hi")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    render_pgm(read_grid(args.inp), out, args.norm, args.lo, args.hi)
    return [out], out.with_name(out.name + ".manifest.json"), {}


COMMANDS = {
    "phantom": cmd_phantom, "strain": cmd_strain, "epr": cmd_epr, "clip": cmd_clip, "guo": cmd_guo,
    "refine": cmd_refine, "metrics": cmd_metrics, "hist": cmd_hist, "render": cmd_render,
}


def _rebase(argv: list[str], workdir: Path | None) -> list[str]:
    if workdir is None:
        return list(argv)
    out = list(argv)
    for k, token in enumerate(out[:-1]):
        if token in PATH_FLAGS and not Path(out[k + 1]).is_absolute():
            out[k + 1] = str(workdir / out[k + 1])
    return out


def _run_replay(args) -> int:
    manifest = json.loads(Path(args.manifest).read_text())
    workdir = Path(args.workdir) if args.workdir else None
    steps = manifest["steps"] if "steps" in manifest else [manifest]
    for step in steps:
        code = main(_rebase(step["argv"], workdir))
        if code != EXIT_OK:
            return code
    expected = manifest.get("expected_outputs", {})
    if "steps" not in manifest:
        expected = {k: v for k, v in manifest.get("outputs", {}).items()}
    mismatched = []
    for rel, digest in sorted(expected.items()):
        path = (workdir / rel) if workdir is not None and not Path(rel).is_absolute() else Path(rel)
        if not path.is_file() or _sha256(path) != digest:
            mismatched.append(rel)
    if mismatched:
        print(f"replay: {len(mismatched)} output(s) differ from the manifest: {', '.join(mismatched)}",
              file=sys.stderr)
        return EXIT_DATA
    print(f"replay: {len(steps)} step(s) reproduced, {len(expected)} output hash(es) verified", file=sys.stderr)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)

    try:
        if args.command == "replay":
            return _run_replay(args)
        _echo_numeric(args)
        start = time.perf_counter()
        outputs, manifest_path, extra = COMMANDS[args.command](args)
        elapsed = time.perf_counter() - start
        if manifest_path is not None:
            manifest = {
                "tool": "elastorefine",
                "version": __version__,
                "subcommand": args.command,
                "argv": _resolved_argv(parser, args),
                "parameters": {k: _jsonable(v) for k, v in sorted(vars(args).items())},
                "seed": getattr(args, "seed", None),
                "outputs": {str(p): _sha256(p) for p in outputs},
                "wall_time_s": elapsed,
                **extra,
            }
            _write_json(manifest, manifest_path)
        return EXIT_OK
    except UsageError as exc:
        print(f"elastorefine {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParameterError as exc:
        print(f"elastorefine {args.command}: invalid parameter: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DegenerateStatisticsError as exc:
        print(f"elastorefine {args.command}: degenerate statistics: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (FormatError, DimensionError) as exc:
        print(f"elastorefine {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"elastorefine {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
