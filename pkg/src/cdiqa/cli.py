"""Command line entry point.

Subcommands: score, racdi, degrade, sweep-blur, explore, gen-pairs,
eval-2afc, serve. Exit codes: 0 on success, 1 on domain errors (missing
files, bad specs, incompatible images), 2 on usage errors. With --json
each subcommand writes exactly one JSON document to stdout.

CDI_THREADS caps parallel trial scoring in eval-2afc.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .bench import BenchError, blur_sweep, load_manifest, metric_2afc, sweep_rows_to_csv
from .cdi import DEFAULT_LAMBDA, DEFAULT_LEVELS, CdiError, rgcdi_psnr
from .degrade import (
    DegradationError,
    apply_degradation,
    gaussian_kernel,
    parse_degradation,
)
from .explore import ExplorerError, explore_indeterminate, explore_nonunique
from .image import ImageError, load_image, psnr, save_image, ssim, to_luma
from .racdi import (
    PredictorError,
    gen_training_pairs,
    identity_predictor,
    predictor_from_files,
    racdi_psnr,
)
from .wavelet import WaveletError

_DOMAIN_ERRORS = (ImageError, DegradationError, CdiError, WaveletError,
                  BenchError, PredictorError, ExplorerError, OSError, ValueError)


def _threads() -> int:
    raw = os.environ.get("CDI_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _emit(args, payload: dict, text_lines: list[str]) -> None:
    if args.json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        for line in text_lines:
            print(line)


def _cmd_score(args) -> int:
    ref = load_image(args.ref)
    degraded = load_image(args.degraded)
    restored = load_image(args.restored)
    score = rgcdi_psnr(ref, degraded, restored, args.lam, args.levels)
    base_psnr = psnr(ref, restored)
    base_ssim = ssim(to_luma(ref), to_luma(restored))
    deg = None
    if args.spec is not None:
        from .degrade import deg_psnr

        deg = deg_psnr(restored, degraded, args.spec)
    payload = {
        "v": 1,
        "rgcdi_psnr": score.rgcdi_psnr,
        "psnr": base_psnr,
        "ssim": base_ssim,
        "deg_psnr": deg,
        "lambda": args.lam,
        "levels": args.levels,
    }
    if args.bands:
        payload["bands"] = [b.to_json_dict() for b in score.per_band]
    lines = [
        f"RGCDI_PSNR: {score.rgcdi_psnr:.4f} dB",
        f"PSNR:       {base_psnr:.4f} dB",
        f"SSIM:       {base_ssim:.4f}",
    ]
    if deg is not None:
        lines.append(f"DEG_PSNR:   {deg:.4f} dB")
    _emit(args, payload, lines)
    return 0


def _make_predictor(text: str):
    if text == "identity":
        return identity_predictor
    if text.startswith("files:"):
        map_path = text[len("files:"):]
        with open(map_path, encoding="utf-8") as fh:
            mapping = json.load(fh)
        if not isinstance(mapping, dict):
            raise PredictorError(f"predictor map {map_path} must be a JSON object")
        return predictor_from_files(mapping)
    raise PredictorError(f"unknown predictor '{text}' (want identity or files:MAP.json)")


def _cmd_racdi(args) -> int:
    degraded = load_image(args.degraded)
    restored = load_image(args.restored)
    predictor = _make_predictor(args.predictor)
    value = racdi_psnr(degraded, restored, predictor, args.lam, args.levels)
    _emit(args, {"v": 1, "racdi_psnr": value, "lambda": args.lam,
                 "levels": args.levels},
          [f"RACDI_PSNR: {value:.4f} dB"])
    return 0


def _cmd_degrade(args) -> int:
    img = load_image(args.input)
    out = apply_degradation(img, parse_degradation(args.spec))
    save_image(out, args.out)
    _emit(args, {"v": 1, "out": args.out, "width": out.width,
                 "height": out.height},
          [f"wrote {args.out} ({out.width}x{out.height})"])
    return 0


def _cmd_sweep_blur(args) -> int:
    sigmas = [float(s) for s in args.sigmas.split(",") if s.strip() != ""]
    rows = blur_sweep(args.ref, args.degraded, args.restored, args.spec,
                      sigmas, args.lam, args.levels)
    csv_text = sweep_rows_to_csv(rows)
    if args.out is not None:
        Path(args.out).write_text(csv_text)
        _emit(args, {"v": 1, "out": args.out, "rows": len(rows)},
              [f"wrote {args.out} ({len(rows)} rows)"])
    else:
        if args.json:
            print(json.dumps({"v": 1, "rows": [r.__dict__ for r in rows]},
                             indent=2, sort_keys=True))
        else:
            sys.stdout.write(csv_text)
    return 0


def _cmd_explore(args) -> int:
    if args.mode == "nonunique":
        y = to_luma(load_image(args.degraded))
        init = to_luma(load_image(args.init))
        kernel = gaussian_kernel(args.sigma, args.size)
        result = explore_nonunique(y, kernel, init, args.lambda_reg,
                                   args.steps, args.step_size)
    else:
        x = to_luma(load_image(args.ref))
        result = explore_indeterminate(x, args.k1_sigma, args.k2_sigma, args.size,
                                       args.lambda_reg, args.steps, args.step_size)
    if args.out is not None:
        save_image(result.image, args.out)
    payload = result.to_json_dict()
    payload["out"] = args.out
    _emit(args, payload, [
        f"final loss:      {result.final_loss:.6e}",
        f"DEG_PSNR:        {result.deg_psnr_vs_input:.4f} dB",
        f"PSNR vs init:    {result.psnr_vs_init:.4f} dB",
        f"accepted steps:  {result.iterations}",
    ] + ([f"wrote {args.out}"] if args.out else []))
    return 0


def _cmd_gen_pairs(args) -> int:
    manifest = gen_training_pairs(args.refs, args.specs, args.out_dir,
                                  args.lam, args.levels)
    payload = {"v": 1, "out_dir": args.out_dir,
               "entries": len(manifest.entries), "errors": len(manifest.errors)}
    _emit(args, payload,
          [f"wrote {len(manifest.entries)} pairs to {args.out_dir}"
           + (f" ({len(manifest.errors)} failures)" if manifest.errors else "")])
    return 0


def _cmd_eval_2afc(args) -> int:
    trials = load_manifest(args.manifest)
    root = args.image_root if args.image_root is not None \
        else str(Path(args.manifest).parent)
    value = metric_2afc(trials, args.metric, image_root=root, lam=args.lam,
                        levels=args.levels, max_workers=_threads())
    _emit(args, {"v": 1, "metric": args.metric, "mean_2afc": value},
          [f"{args.metric} 2AFC: {value:.4f}"])
    return 0


def _cmd_serve(args) -> int:
    from .annotate import serve

    serve(args.manifest, args.images, args.port, args.log, args.static)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cdiqa",
        description="Fidelity scoring for blind image restoration by "
                    "consistency with the degraded image.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, spec_required=False):
        p.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA,
                       help="HVS noise scale (default 0.3)")
        p.add_argument("--levels", type=int, default=DEFAULT_LEVELS,
                       help="wavelet decomposition levels (default 4)")
        p.add_argument("--json", action="store_true",
                       help="emit a single JSON document on stdout")

    p = sub.add_parser("score", help="score a (ref, degraded, restored) triple")
    p.add_argument("--ref", required=True)
    p.add_argument("--degraded", required=True)
    p.add_argument("--restored", required=True)
    p.add_argument("--spec", help="degradation spec for DEG_PSNR")
    p.add_argument("--bands", action="store_true",
                   help="include per-band diagnostics in --json output")
    common(p)
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("racdi", help="reference-agnostic score")
    p.add_argument("--degraded", required=True)
    p.add_argument("--restored", required=True)
    p.add_argument("--predictor", default="identity",
                   help="identity or files:MAP.json")
    common(p)
    p.set_defaults(func=_cmd_racdi)

    p = sub.add_parser("degrade", help="apply a degradation spec to an image")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--spec", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_degrade)

    p = sub.add_parser("sweep-blur", help="metric robustness to post-blur (CSV)")
    p.add_argument("--ref", required=True)
    p.add_argument("--degraded", required=True)
    p.add_argument("--restored", required=True)
    p.add_argument("--spec", required=True)
    p.add_argument("--sigmas", required=True, help="comma-separated, must include 0")
    p.add_argument("--out", help="CSV file (default stdout)")
    common(p)
    p.set_defaults(func=_cmd_sweep_blur)

    p = sub.add_parser("explore", help="solution-space exploration")
    mode = p.add_subparsers(dest="mode", required=True)
    pn = mode.add_parser("nonunique", help="distinct solutions for one degraded image")
    pn.add_argument("--degraded", required=True)
    pn.add_argument("--init", required=True)
    pn.add_argument("--sigma", type=float, default=5.0, help="blur kernel sigma")
    pn.add_argument("--size", type=int, default=9, help="blur kernel size")
    pi = mode.add_parser("indeterminate", help="restore under a mismatched kernel")
    pi.add_argument("--ref", required=True)
    pi.add_argument("--k1-sigma", type=float, default=1.0)
    pi.add_argument("--k2-sigma", type=float, default=1.12)
    pi.add_argument("--size", type=int, default=13)
    for pp in (pn, pi):
        pp.add_argument("--lambda-reg", type=float, default=0.005)
        pp.add_argument("--steps", type=int, default=500)
        pp.add_argument("--step-size", type=float, default=0.5)
        pp.add_argument("--out", help="write the result image here")
        pp.add_argument("--json", action="store_true")
        pp.set_defaults(func=_cmd_explore)

    p = sub.add_parser("gen-pairs", help="write (degraded, target) training pairs")
    p.add_argument("--refs", nargs="+", required=True)
    p.add_argument("--specs", nargs="+", required=True)
    p.add_argument("--out-dir", required=True)
    common(p)
    p.set_defaults(func=_cmd_gen_pairs)

    p = sub.add_parser("eval-2afc", help="score a metric against recorded judgments")
    p.add_argument("--manifest", required=True)
    p.add_argument("--metric", required=True,
                   choices=["psnr", "ssim", "deg_psnr", "rgcdi", "racdi"])
    p.add_argument("--image-root", help="default: the manifest's directory")
    common(p)
    p.set_defaults(func=_cmd_eval_2afc)

    p = sub.add_parser("serve", help="run the annotation service")
    p.add_argument("--manifest", required=True)
    p.add_argument("--images", required=True, help="image root directory")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--log", required=True, help="append-only judgment log (JSONL)")
    p.add_argument("--static", help="directory with built UI assets")
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _DOMAIN_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
