"""Command-line front end: simulate, reconstruct, analyze, evaluate, bench.

Every subcommand reads flags plus an optional ``--config`` file of
``key = value`` pairs (flags win on conflict, unknown keys are errors),
validates the merged configuration before any computation, and emits both
a human-readable report and machine-readable ``key = value`` lines.

Exit status: 0 success, 1 validation/usage error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .beamformer import INTERPOLATIONS, DasConfig
from .bench import (
    DEFAULT_MEASURED_RUNS,
    DEFAULT_THRESHOLD_HZ,
    DEFAULT_WARMUP_RUNS,
    bench_pipeline,
    benchmark,
    format_stats,
)
from .cost_model import fit_width_multiplier, format_report, network_cost
from .domain import (
    DetectorArray,
    Image,
    ImageGrid,
    ScanProfile,
    Sinogram,
    SpeedOfSound,
    desk_profile,
    paper_profile,
)
from .estimators import DelayAndSumReconstructor, NetworkReconstructor
from .forward_model import (
    MbConfig,
    NumericalFailure,
    build_forward_operator,
    cgls_solve,
    mb_reconstruct,
    simulate_sinogram,
)
from .metrics import aggregate, format_table, image_metrics, residual_norm
from .nn import arch_from_metadata, arch_to_metadata, template_arch
from .nn.arch import TEMPLATES
from .oarr import (
    format_keyvalues,
    parse_keyvalues,
    read_array,
    read_sidecar,
    write_array,
)
from .phantoms import disks, from_image_file, point_sources

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2

PHANTOMS = ("points", "disks", "image")
RECON_METHODS = ("das", "mb", "net")
BENCH_METHODS = ("das", "mb", "net", "e2e")


class CliError(Exception):
    """Configuration or usage problem; maps to exit status 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise CliError(message)


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {raw!r}")


_PROFILE_DEFAULTS = {
    "profile": "desk",
    "grid": None,
    "pixel_size": None,
    "sos": None,
    "geometry_file": None,
    "sampling_rate_hz": None,
    "t0_s": None,
    "num_samples": None,
}

_DEFAULTS = {
    "simulate": {
        **_PROFILE_DEFAULTS,
        "phantom": "disks",
        "image_file": None,
        "num_sources": 10,
        "num_disks": 5,
        "seed": 0,
        "noise_std": 0.0,
        "out": None,
    },
    "reconstruct": {
        "method": None,
        "scan": None,
        "out": None,
        "weights": None,
        "interpolation": "linear",
        "normalize": True,
        "max_iters": 100,
        "stop_tol": 1e-6,
        "nonneg": True,
        "workers": None,
    },
    "analyze": {
        "arch": "default",
        "width_multiplier": 1.0,
        "input_size": 416,
        "fit_params": None,
        "fit_tol": 0.10,
        "out": None,
    },
    "evaluate": {
        "pred": None,
        "ref": None,
        "scan": None,
        "out": None,
    },
    "bench": {
        **_PROFILE_DEFAULTS,
        "method": "das",
        "runs": DEFAULT_MEASURED_RUNS,
        "warmup": DEFAULT_WARMUP_RUNS,
        "threshold_hz": DEFAULT_THRESHOLD_HZ,
        "scan": None,
        "weights": None,
        "workers": None,
        "seed": 0,
        "max_iters": 100,
        "out": None,
    },
}

_CONVERT = {
    "phantom": str,
    "image_file": str,
    "num_sources": int,
    "num_disks": int,
    "seed": int,
    "noise_std": float,
    "out": str,
    "profile": str,
    "grid": int,
    "pixel_size": float,
    "sos": float,
    "geometry_file": str,
    "sampling_rate_hz": float,
    "t0_s": float,
    "num_samples": int,
    "method": str,
    "scan": str,
    "weights": str,
    "interpolation": str,
    "normalize": _parse_bool,
    "max_iters": int,
    "stop_tol": float,
    "nonneg": _parse_bool,
    "workers": int,
    "arch": str,
    "width_multiplier": float,
    "input_size": int,
    "fit_params": int,
    "fit_tol": float,
    "pred": str,
    "ref": str,
    "runs": int,
    "warmup": int,
    "threshold_hz": float,
}


def _add_profile_options(p):
    p.add_argument("--profile", help="stock profile: desk or paper")
    p.add_argument("--grid", type=int, metavar="N", help="grid side in pixels")
    p.add_argument("--pixel-size", type=float, metavar="M", help="pixel size in meters")
    p.add_argument("--sos", type=float, metavar="V", help="speed of sound in m/s")
    p.add_argument("--geometry-file", metavar="PATH", help="key=value detector geometry")
    p.add_argument("--sampling-rate-hz", type=float, metavar="HZ")
    p.add_argument("--t0-s", type=float, metavar="S", help="time of the first sample")
    p.add_argument("--num-samples", type=int, metavar="N")


def build_parser() -> _Parser:
    parser = _Parser(prog="oareco", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("simulate", help="synthesize a phantom scan")
    p.add_argument("--phantom", help="points, disks, or image")
    p.add_argument("--image-file", metavar="PATH", help="grayscale source for --phantom image")
    p.add_argument("--num-sources", type=int)
    p.add_argument("--num-disks", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--noise-std", type=float)
    p.add_argument("--out", metavar="DIR")
    _add_profile_options(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reconstruct", help="reconstruct an image from a scan")
    p.add_argument("--method", help="das, mb, or net")
    p.add_argument("--scan", metavar="DIR", help="directory holding sinogram.oarr")
    p.add_argument("--out", metavar="DIR")
    p.add_argument("--weights", metavar="FILE", help="weight file for --method net")
    p.add_argument("--interpolation", help="linear or nearest")
    p.add_argument("--normalize", action=argparse.BooleanOptionalAction)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--stop-tol", type=float)
    p.add_argument("--nonneg", action=argparse.BooleanOptionalAction)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("analyze", help="computational-cost report for an architecture")
    p.add_argument("--arch", help="template name or architecture sidecar path")
    p.add_argument("--width-multiplier", type=float)
    p.add_argument("--input-size", type=int)
    p.add_argument("--fit-params", type=int, metavar="N", help="fit the width multiplier")
    p.add_argument("--fit-tol", type=float)
    p.add_argument("--out", metavar="DIR")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("evaluate", help="image-quality metrics for reconstructions")
    p.add_argument("--pred", metavar="PATH", help=".oarr file or directory")
    p.add_argument("--ref", metavar="PATH", help=".oarr file or directory")
    p.add_argument("--scan", metavar="DIR", help="scan directory for residual norms")
    p.add_argument("--out", metavar="DIR")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bench", help="latency and frame-rate measurement")
    p.add_argument("--method", help="das, mb, net, or e2e")
    p.add_argument("--runs", type=int)
    p.add_argument("--warmup", type=int)
    p.add_argument("--threshold-hz", type=float)
    p.add_argument("--scan", metavar="DIR")
    p.add_argument("--weights", metavar="FILE")
    p.add_argument("--workers", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--out", metavar="DIR")
    _add_profile_options(p)
    p.set_defaults(func=cmd_bench)

    for sp in sub.choices.values():
        sp.add_argument("--config", metavar="FILE", help="key=value config; flags win")
    return parser


def _merge(args, command: str) -> dict:
    cfg = dict(_DEFAULTS[command])
    config_path = getattr(args, "config", None)
    if config_path is not None:
        path = Path(config_path)
        if not path.is_file():
            raise CliError(f"config file not found: {path}")
        pairs = parse_keyvalues(path.read_text(encoding="utf-8"), source=str(path))
        unknown = sorted(set(pairs) - set(cfg))
        if unknown:
            raise CliError(f"unknown config keys for {command}: {', '.join(unknown)}")
        for key, raw in pairs.items():
            try:
                cfg[key] = _CONVERT[key](raw)
            except ValueError as exc:
                raise CliError(f"config key {key!r}: {exc}") from exc
    for key in cfg:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def _require(cfg: dict, command: str, *names):
    missing = [n for n in names if cfg.get(n) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise CliError(f"{command} requires {flags}")


def _choice(cfg: dict, key: str, options):
    if cfg[key] not in options:
        raise CliError(f"{key} must be one of {', '.join(options)}; got {cfg[key]!r}")


def _build_profile(cfg: dict) -> ScanProfile:
    _choice(cfg, "profile", ("desk", "paper"))
    base = desk_profile() if cfg["profile"] == "desk" else paper_profile()
    array = base.array
    if cfg["geometry_file"] is not None:
        path = Path(cfg["geometry_file"])
        if not path.is_file():
            raise CliError(f"geometry file not found: {path}")
        meta = parse_keyvalues(path.read_text(encoding="utf-8"), source=str(path))
        try:
            array = DetectorArray(
                num_elements=int(float(meta["num_elements"])),
                radius_m=float(meta["radius_m"]),
                coverage_rad=float(meta["coverage_rad"]),
                center_xy_m=(
                    float(meta.get("center_x_m", 0.0)),
                    float(meta.get("center_y_m", 0.0)),
                ),
                rotation_rad=float(meta.get("rotation_rad", 0.0)),
            )
        except KeyError as exc:
            raise CliError(f"geometry file is missing key {exc.args[0]!r}") from exc
    grid = base.grid
    if cfg["grid"] is not None or cfg["pixel_size"] is not None:
        grid = ImageGrid(
            side_px=cfg["grid"] if cfg["grid"] is not None else grid.side_px,
            pixel_size_m=cfg["pixel_size"] if cfg["pixel_size"] is not None else grid.pixel_size_m,
        )
    sos = SpeedOfSound(cfg["sos"]) if cfg["sos"] is not None else base.sos
    return ScanProfile(
        array=array,
        grid=grid,
        sos=sos,
        sampling_rate_hz=(
            cfg["sampling_rate_hz"] if cfg["sampling_rate_hz"] is not None else base.sampling_rate_hz
        ),
        t0_s=cfg["t0_s"] if cfg["t0_s"] is not None else base.t0_s,
        num_samples=cfg["num_samples"] if cfg["num_samples"] is not None else base.num_samples,
    )


def _emit(pairs: dict):
    sys.stdout.write(format_keyvalues(pairs))


def _out_dir(cfg: dict) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_scan(scan_dir) -> tuple:
    path = Path(scan_dir)
    sino_path = path if path.is_file() else path / "sinogram.oarr"
    if not sino_path.is_file():
        raise CliError(f"no sinogram found at {sino_path}")
    data = read_array(sino_path, "sinogram")
    profile = ScanProfile.from_metadata(read_sidecar(sino_path))
    sino = Sinogram(data=data, sampling_rate_hz=profile.sampling_rate_hz, t0_s=profile.t0_s)
    return sino, profile


def cmd_simulate(cfg: dict) -> int:
    _require(cfg, "simulate", "out")
    _choice(cfg, "phantom", PHANTOMS)
    profile = _build_profile(cfg)
    kind = cfg["phantom"]
    if kind == "points":
        image, _ = point_sources(profile.grid, cfg["num_sources"], seed=cfg["seed"])
    elif kind == "disks":
        image = disks(profile.grid, cfg["num_disks"], seed=cfg["seed"])
    else:
        if cfg["image_file"] is None:
            raise CliError("simulate --phantom image requires --image-file")
        image = from_image_file(cfg["image_file"], profile.grid)
    op = build_forward_operator(profile)
    sino = simulate_sinogram(image, op, noise_std=cfg["noise_std"], seed=cfg["seed"])
    out = _out_dir(cfg)
    meta = profile.as_metadata()
    meta.update(
        {
            "phantom": kind,
            "seed": cfg["seed"],
            "noise_std": cfg["noise_std"],
            "operator_fingerprint": op.fingerprint,
        }
    )
    phantom_path = out / "phantom.oarr"
    sino_path = out / "sinogram.oarr"
    write_array(phantom_path, "image", image.data, metadata=meta)
    write_array(sino_path, "sinogram", sino.data, metadata=meta)
    _emit(
        {
            "phantom_file": phantom_path,
            "sinogram_file": sino_path,
            "detectors": sino.num_elements,
            "samples": sino.num_samples,
            "grid": profile.grid.side_px,
            "operator_fingerprint": op.fingerprint,
        }
    )
    return EXIT_OK


def cmd_reconstruct(cfg: dict) -> int:
    _require(cfg, "reconstruct", "method", "scan", "out")
    _choice(cfg, "method", RECON_METHODS)
    _choice(cfg, "interpolation", INTERPOLATIONS)
    sino, profile = _load_scan(cfg["scan"])
    out = _out_dir(cfg)
    method = cfg["method"]
    info = profile.as_metadata()
    info["method"] = method

    if method == "das":
        das = DelayAndSumReconstructor(
            profile,
            interpolation=cfg["interpolation"],
            normalize_by_count=cfg["normalize"],
            workers=cfg["workers"],
        ).fit()
        image_data = das.transform(sino.data)
        info.update(interpolation=cfg["interpolation"], normalize=cfg["normalize"])
    elif method == "mb":
        op = build_forward_operator(profile)
        mb_cfg = MbConfig(
            max_iters=cfg["max_iters"], nonneg=cfg["nonneg"], stop_tol=cfg["stop_tol"]
        )
        x, history = cgls_solve(op.apply, op.adjoint, sino.data.ravel(), op.shape[1], mb_cfg)
        side = profile.grid.side_px
        image_data = x.reshape(side, side)
        info.update(
            iterations=len(history) - 1,
            residual_rel=history[-1] / history[0] if history[0] else 0.0,
            operator_fingerprint=op.fingerprint,
        )
    else:
        if cfg["weights"] is None:
            raise CliError("reconstruct --method net requires --weights")
        das = DelayAndSumReconstructor(
            profile, interpolation=cfg["interpolation"], workers=cfg["workers"]
        ).fit()
        net = NetworkReconstructor(model_path=cfg["weights"], profile=profile).fit()
        image_data = net.predict(das.transform(sino.data))
        info.update(weights=cfg["weights"], interpolation=cfg["interpolation"])

    recon_path = out / f"recon_{method}.oarr"
    write_array(recon_path, "image", image_data, metadata=info)
    _emit({"output": recon_path, "method": method, "grid": profile.grid.side_px})
    return EXIT_OK


def cmd_analyze(cfg: dict) -> int:
    arch_arg = cfg["arch"]
    template = None
    if arch_arg in TEMPLATES:
        template = TEMPLATES[arch_arg]
        arch = template_arch(arch_arg, cfg["width_multiplier"])
    elif Path(arch_arg).is_file():
        text = Path(arch_arg).read_text(encoding="utf-8")
        arch = arch_from_metadata(parse_keyvalues(text, source=arch_arg))
    else:
        raise CliError(
            f"--arch must be a template ({', '.join(sorted(TEMPLATES))}) or a sidecar file"
        )
    h = w = cfg["input_size"]
    kv = {}
    if cfg["fit_params"] is not None:
        if template is None:
            raise CliError("--fit-params requires a named template, not a sidecar file")
        fit = fit_width_multiplier(template, h, w, cfg["fit_params"], cfg["fit_tol"])
        arch = template(fit.width_multiplier)
        kv.update(
            fitted_width_multiplier=fit.width_multiplier,
            target_params=fit.target_params,
            achieved_params=fit.achieved_params,
            fit_rel_error=fit.rel_error,
        )
    report = network_cost(arch, h, w)
    print(format_report(report, name=arch.name))
    print()
    kv = {
        "arch": arch.name,
        "width_multiplier": arch.width_multiplier,
        "input_size": h,
        "flops": report.flops,
        "macs": report.macs,
        "params": report.params,
        **kv,
    }
    _emit(kv)
    if cfg["out"] is not None:
        out = _out_dir(cfg)
        (out / "analyze.txt").write_text(format_keyvalues(kv), encoding="utf-8")
        (out / "arch.meta").write_text(
            format_keyvalues(arch_to_metadata(arch)), encoding="utf-8"
        )
    return EXIT_OK


def _image_pairs(pred_path: Path, ref_path: Path) -> list:
    if pred_path.is_dir() != ref_path.is_dir():
        raise CliError("--pred and --ref must both be files or both be directories")
    if pred_path.is_dir():
        pred_names = sorted(p.name for p in pred_path.glob("*.oarr"))
        ref_names = sorted(p.name for p in ref_path.glob("*.oarr"))
        if pred_names != ref_names:
            raise CliError("pred and ref directories do not hold the same .oarr file names")
        if not pred_names:
            raise CliError("no .oarr files to evaluate")
        return [(pred_path / n, ref_path / n) for n in pred_names]
    for p in (pred_path, ref_path):
        if not p.is_file():
            raise CliError(f"file not found: {p}")
    return [(pred_path, ref_path)]


def _load_image(path: Path) -> Image:
    data = read_array(path)
    grid = ImageGrid(side_px=data.shape[0], pixel_size_m=1.0)
    try:
        grid = ScanProfile.from_metadata(read_sidecar(path)).grid
    except (OSError, KeyError):
        pass
    return Image(data=data.astype("float64"), grid=grid)


def cmd_evaluate(cfg: dict) -> int:
    _require(cfg, "evaluate", "pred", "ref")
    pairs = _image_pairs(Path(cfg["pred"]), Path(cfg["ref"]))
    op = None
    sino = None
    if cfg["scan"] is not None:
        sino, profile = _load_scan(cfg["scan"])
        op = build_forward_operator(profile)
    reports = []
    residuals = [] if op is not None else None
    for pred_file, ref_file in pairs:
        pred = _load_image(pred_file)
        ref = _load_image(ref_file)
        reports.append(image_metrics(pred, ref))
        if op is not None:
            residuals.append(residual_norm(pred, sino, op))
    summary = aggregate(reports, residuals)
    print(format_table(summary))
    print()
    kv = {"pairs": len(pairs), **summary.as_dict()}
    _emit(kv)
    if cfg["out"] is not None:
        out = _out_dir(cfg)
        (out / "metrics.txt").write_text(format_keyvalues(kv), encoding="utf-8")
    return EXIT_OK


def cmd_bench(cfg: dict) -> int:
    _choice(cfg, "method", BENCH_METHODS)
    if cfg["scan"] is not None:
        sino, profile = _load_scan(cfg["scan"])
    else:
        profile = _build_profile(cfg)
        image = disks(profile.grid, seed=cfg["seed"])
        op = build_forward_operator(profile)
        sino = simulate_sinogram(image, op)
    method = cfg["method"]
    model = None
    if method in ("net", "e2e"):
        if cfg["weights"] is None:
            raise CliError(f"bench --method {method} requires --weights")
        from .nn import load_model

        model = load_model(cfg["weights"])
    if method == "mb":
        op = build_forward_operator(profile)
        mb_cfg = MbConfig(max_iters=cfg["max_iters"])

        def task():
            mb_reconstruct(sino, op, mb_cfg)

        stats = benchmark(task, cfg["warmup"], cfg["runs"], cfg["threshold_hz"])
    else:
        stats = bench_pipeline(
            sino,
            profile,
            model=model,
            stages=(method,),
            warmup_runs=cfg["warmup"],
            measured_runs=cfg["runs"],
            threshold_hz=cfg["threshold_hz"],
            das_config=DasConfig(),
            workers=cfg["workers"],
        )[method]
    print(format_stats({method: stats}))
    print()
    kv = {"method": method, **stats.as_dict()}
    _emit(kv)
    if cfg["out"] is not None:
        out = _out_dir(cfg)
        (out / "bench.txt").write_text(format_keyvalues(kv), encoding="utf-8")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "func", None) is None:
            parser.print_usage(sys.stderr)
            raise CliError("a subcommand is required")
        cfg = _merge(args, args.command)
        return args.func(cfg)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
