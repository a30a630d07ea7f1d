"""Command-line front end: ``misr-refkit <subcommand> [flags]``.

Exit codes: 0 success, 2 partial success (some scenes skipped), 1 fatal
error, 64 usage error. Data goes to files and stdout; progress and
diagnostics go to stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path

from . import __version__, _kernels
from .baseline_sr import SrConfig, bicubic_sisr, shift_and_add
from .dataset_io import (
    list_scenes,
    load_scene,
    read_reference_csv,
    write_decisions_csv,
    write_png16,
)
from .errors import RefkitError
from .metrics import DEFAULT_BORDER, cpsnr
from .reference import (
    METHODS,
    HeuristicWeights,
    ReferenceDecision,
    find_true_reference,
    heuristic_reference,
    select_reference,
)
from .registration import RegistrationConfig
from .synthetic import SyntheticConfig, generate_corpus

log = logging.getLogger("misr_refkit")

EXIT_OK, EXIT_FATAL, EXIT_PARTIAL, EXIT_USAGE = 0, 1, 2, 64
SR_METHODS = ("shift-and-add", "bicubic")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("MISR_REFKIT_JOBS", "1")))
    except ValueError:
        return 1


# -- manifest -----------------------------------------------------------------

def write_manifest(path: Path, argv, config: dict, seed=None, timings=None) -> Path:
    """Write ``<path>.manifest.json`` next to a report file; timestamps live only here."""
    mpath = Path(str(path) + ".manifest.json")
    doc = {
        "command_line": list(argv),
        "config": config,
        "seed": seed,
        "tool_version": __version__,
        "kernel_backend": _kernels.BACKEND,
        "created": datetime.now(timezone.utc).isoformat(),
        "per_scene_seconds": timings or {},
    }
    mpath.write_text(json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")
    return mpath


def _run_pool(fn, tasks, jobs):
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


def _reg_config(args) -> RegistrationConfig:
    return RegistrationConfig(
        max_iters=args.reg_max_iters, tol=args.reg_tol, pyramid_levels=args.reg_pyramid_levels
    )


def _truth_path(args) -> Path | None:
    if args.truth:
        return Path(args.truth)
    p = Path(args.root) / args.band / "truth.csv"
    return p if p.exists() else None


def _report_accuracy(decisions: list[ReferenceDecision], truth_path: Path | None, label: str) -> None:
    if truth_path is None:
        return
    truth = read_reference_csv(truth_path)
    scored = [d for d in decisions if d.scene_id in truth]
    if not scored:
        return
    hits = sum(d.chosen == truth[d.scene_id] for d in scored)
    print(f"{label} accuracy: {hits / len(scored):.4f} ({hits}/{len(scored)})")


# -- gen ----------------------------------------------------------------------

def cmd_gen(args, argv) -> int:
    cfg = SyntheticConfig(
        seed=args.seed,
        n_scenes=args.n_scenes,
        n_views=args.n_views,
        shift_sigma=args.shift_sigma,
        noise_sigma=args.noise_sigma,
        cloud_coverage_max=args.cloud_coverage_max,
        temporal_amplitude=args.temporal_amplitude,
        bias_range=args.bias_range,
        lr_size=args.lr_size,
        band=args.band,
    )
    t0 = time.perf_counter()
    path = generate_corpus(cfg, args.root, force=args.force, jobs=args.jobs)
    write_manifest(path, argv, asdict(cfg), seed=args.seed)
    log.info("generated %d scenes in %.1fs", cfg.n_scenes, time.perf_counter() - t0)
    return EXIT_OK


# -- find-ref / heuristic-ref -------------------------------------------------

def _similarity_task(task):
    root, band, sid, validate, reg, remove_bias = task
    t0 = time.perf_counter()
    try:
        scene = load_scene(root, band, sid, validate)
        d = find_true_reference(scene, reg, remove_bias=remove_bias)
        return sid, d, None, time.perf_counter() - t0
    except RefkitError as exc:
        return sid, None, str(exc), time.perf_counter() - t0


def _heuristic_task(task):
    root, band, sid, validate, weights, opts = task
    t0 = time.perf_counter()
    try:
        scene = load_scene(root, band, sid, validate)
        d = heuristic_reference(scene, weights, **opts)
        return sid, d, None, time.perf_counter() - t0
    except RefkitError as exc:
        return sid, None, str(exc), time.perf_counter() - t0


def _collect_decisions(results):
    decisions, skipped, timings = [], [], {}
    for sid, d, err, dt in results:
        timings[sid] = round(dt, 4)
        if d is None:
            log.warning("skipped %s: %s", sid, err)
            skipped.append(sid)
        else:
            decisions.append(d)
    return decisions, skipped, timings


def cmd_find_ref(args, argv) -> int:
    reg = _reg_config(args)
    ids = list_scenes(args.root, args.band)
    tasks = [(args.root, args.band, sid, not args.no_validate, reg, args.remove_bias) for sid in ids]
    decisions, skipped, timings = _collect_decisions(_run_pool(_similarity_task, tasks, args.jobs))
    out = Path(args.out or Path(args.root) / "refs" / f"{args.band}_similarity.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    write_decisions_csv(out, decisions)
    write_manifest(out, argv, {"registration": asdict(reg), "remove_bias": args.remove_bias}, timings=timings)
    _report_accuracy(decisions, _truth_path(args), "similarity")
    return EXIT_PARTIAL if skipped else EXIT_OK


def _heuristic_options(args) -> dict:
    return {
        "raw_terms": args.heuristic_raw_terms,
        "clearance_sign": -1.0 if args.negate_clearance else 1.0,
        "median_mode": args.median_mode,
        "clear_only": args.median_clear_only,
    }


def cmd_heuristic_ref(args, argv) -> int:
    weights = HeuristicWeights(args.alpha, args.beta)
    opts = _heuristic_options(args)
    ids = list_scenes(args.root, args.band)
    tasks = [(args.root, args.band, sid, not args.no_validate, weights, opts) for sid in ids]
    decisions, skipped, timings = _collect_decisions(_run_pool(_heuristic_task, tasks, args.jobs))
    out = Path(args.out or Path(args.root) / "refs" / f"{args.band}_heuristic.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    write_decisions_csv(out, decisions)
    write_manifest(out, argv, {"weights": asdict(weights), **opts}, timings=timings)
    _report_accuracy(decisions, _truth_path(args), "heuristic")
    return EXIT_PARTIAL if skipped else EXIT_OK


# -- sr -----------------------------------------------------------------------

def _sr_task(task):
    root, band, sid, sr_method, cfg, fixed_refs, hopts = task
    t0 = time.perf_counter()
    try:
        scene = load_scene(root, band, sid, False)
        decision = None
        if fixed_refs is not None:
            if sid not in fixed_refs:
                raise RefkitError(f"no reference index for {sid} in the supplied CSV")
            cfg = SrConfig(**{**asdict(cfg), "ref_method": "fixed", "fixed_index": fixed_refs[sid],
                              "registration": cfg.registration})
        elif cfg.ref_method == "heuristic":
            decision = heuristic_reference(scene, hopts["weights"], **hopts["opts"])
        elif cfg.ref_method in METHODS:
            decision = select_reference(scene, cfg.ref_method)
        if sr_method == "bicubic":
            from .baseline_sr import resolve_reference

            ref_img, _, _, _ = resolve_reference(scene, cfg, decision)
            img = bicubic_sisr(ref_img, cfg.upscale)
            warn = []
        else:
            res = shift_and_add(scene, cfg, decision)
            img, warn = res.image, res.warnings
        return sid, img, warn, None, time.perf_counter() - t0
    except RefkitError as exc:
        return sid, None, [], str(exc), time.perf_counter() - t0


def _ref_label(args) -> str:
    return "refs" if args.refs else args.ref_method.replace(":", "").replace("(", "").replace(")", "")


def cmd_sr(args, argv) -> int:
    try:
        cfg = SrConfig.from_method(args.ref_method, registration=_reg_config(args))
    except RefkitError as exc:
        raise UsageError(str(exc)) from exc
    fixed_refs = read_reference_csv(args.refs) if args.refs else None
    out_dir = Path(args.out_dir or Path(args.root) / "sr" / args.sr_method / _ref_label(args) / args.band)
    out_dir.mkdir(parents=True, exist_ok=True)
    hopts = {"weights": HeuristicWeights(args.alpha, args.beta), "opts": _heuristic_options(args)}
    ids = list_scenes(args.root, args.band)
    tasks = [(args.root, args.band, sid, args.sr_method, cfg, fixed_refs, hopts) for sid in ids]
    skipped, timings = [], {}
    for sid, img, warn, err, dt in _run_pool(_sr_task, tasks, args.jobs):
        timings[sid] = round(dt, 4)
        if img is None:
            log.warning("skipped %s: %s", sid, err)
            skipped.append(sid)
            continue
        for w in warn:
            log.warning("%s: %s", sid, w)
        path = out_dir / f"{sid}_SR.png"
        if path.exists() and not args.force:
            log.error("%s exists; pass --force to overwrite", path)
            return EXIT_FATAL
        write_png16(path, img)
    write_manifest(out_dir / "sr", argv, {"sr_method": args.sr_method, "ref_method": args.ref_method,
                                          "refs": args.refs, "config": asdict(cfg)}, timings=timings)
    return EXIT_PARTIAL if skipped else EXIT_OK


# -- eval ---------------------------------------------------------------------

def _eval_task(task):
    from .dataset_io import read_png16

    root, band, sid, sr_dir, border, window = task
    path = Path(sr_dir) / f"{sid}_SR.png"
    try:
        scene = load_scene(root, band, sid, False)
        if scene.hr is None:
            return sid, None, "scene has no HR target"
        if not path.exists():
            return sid, None, f"missing {path.name}"
        return sid, cpsnr(read_png16(path), scene.hr, scene.hr_mask, border, sid, window), None
    except RefkitError as exc:
        return sid, None, str(exc)


def cmd_eval(args, argv) -> int:
    sr_dir = Path(args.sr_dir)
    ids = list_scenes(args.root, args.band)
    tasks = [(args.root, args.band, sid, sr_dir, args.cpsnr_border, args.cpsnr_window) for sid in ids]
    reports, skipped = [], []
    for sid, rep, err in _run_pool(_eval_task, tasks, args.jobs):
        if rep is None:
            log.warning("skipped %s: %s", sid, err)
            skipped.append(sid)
        else:
            reports.append(rep)
    out = Path(args.out or sr_dir / "eval.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        fh.write("scene_id,cpsnr_db,u,v,bias\n")
        for r in reports:
            fh.write(f"{r.scene_id},{r.cpsnr_db:.6f},{r.best_shift[0]},{r.best_shift[1]},{r.bias_b:.8f}\n")
    mean = math.fsum(r.cpsnr_db for r in reports) / len(reports) if reports else None
    mpath = write_manifest(out, argv, {"border": args.cpsnr_border, "window": args.cpsnr_window,
                                       "sr_dir": str(sr_dir)})
    summary = {
        "mean_cpsnr": None if mean is None else round(mean, 6),
        "n_scenes": len(reports),
        "n_skipped": len(skipped),
        "skipped": skipped,
        "manifest": mpath.name,
    }
    (out.parent / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n",
                                             encoding="utf-8")
    print(json.dumps({k: summary[k] for k in ("mean_cpsnr", "n_scenes", "n_skipped")}, sort_keys=True))
    return EXIT_PARTIAL if skipped else EXIT_OK


# -- report -------------------------------------------------------------------

def build_report(sr_root: Path, band: str) -> tuple[list[str], list[list[str]]]:
    """Cross-tab mean cPSNR: rows are SR methods, columns evaluation references."""
    cells: dict[tuple[str, str], float | None] = {}
    if sr_root.is_dir():
        for summary in sorted(sr_root.glob(f"*/*/{band}/summary.json")):
            ref = summary.parent.parent.name
            method = summary.parent.parent.parent.name
            cells[(method, ref)] = json.loads(summary.read_text(encoding="utf-8")).get("mean_cpsnr")
    methods = sorted({m for m, _ in cells})
    refs = sorted({r for _, r in cells}, key=lambda r: (METHODS.index(r) if r in METHODS else len(METHODS), r))
    header = ["sr_method", *refs]
    rows = []
    for m in methods:
        row = [m]
        for r in refs:
            v = cells.get((m, r))
            row.append("" if v is None else f"{v:.2f}")
        rows.append(row)
    return header, rows


def cmd_report(args, argv) -> int:
    sr_root = Path(args.sr_root or Path(args.root) / "sr")
    header, rows = build_report(sr_root, args.band)
    lines = [",".join(header)] + [",".join(r) for r in rows]
    text = "\n".join(lines) + "\n"
    out = Path(args.out or Path(args.root) / f"report_{args.band}.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text, encoding="utf-8")
    write_manifest(out, argv, {"sr_root": str(sr_root)})
    sys.stdout.write(text)
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def _add_common(p, *, jobs=True):
    p.add_argument("--root", required=True, help="dataset root directory")
    p.add_argument("--band", default="NIR", choices=("NIR", "RED"))
    if jobs:
        p.add_argument("--jobs", type=int, default=_default_jobs(),
                       help="worker processes (default: $MISR_REFKIT_JOBS or 1)")


def _add_reg(p):
    p.add_argument("--reg-max-iters", type=int, default=50)
    p.add_argument("--reg-tol", type=float, default=1e-3)
    p.add_argument("--reg-pyramid-levels", type=int, default=3)


def _add_heuristic(p):
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--beta", type=float, default=0.3)
    p.add_argument("--heuristic-raw-terms", action="store_true",
                   help="use unnormalized mask-L1 and clearance terms")
    p.add_argument("--negate-clearance", action="store_true", help="subtract the clearance term instead of adding it")
    p.add_argument("--median-mode", choices=("pooled", "per_view"), default="pooled")
    p.add_argument("--median-clear-only", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="misr-refkit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="write a synthetic corpus with a truth manifest")
    _add_common(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-scenes", type=int, default=200)
    p.add_argument("--n-views", type=int, default=12)
    p.add_argument("--lr-size", type=int, default=128)
    p.add_argument("--shift-sigma", type=float, default=0.5)
    p.add_argument("--noise-sigma", type=float, default=0.01)
    p.add_argument("--cloud-coverage-max", type=float, default=0.40)
    p.add_argument("--temporal-amplitude", type=float, default=0.15)
    p.add_argument("--bias-range", type=float, default=0.03)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("find-ref", help="similarity reference against the HR target")
    _add_common(p)
    _add_reg(p)
    p.add_argument("--out")
    p.add_argument("--truth", help="truth CSV for an accuracy line (default: <root>/<band>/truth.csv)")
    p.add_argument("--remove-bias", action="store_true")
    p.add_argument("--no-validate", action="store_true")
    p.set_defaults(func=cmd_find_ref)

    p = sub.add_parser("heuristic-ref", help="mask/median/clearance heuristic reference")
    _add_common(p)
    _add_heuristic(p)
    p.add_argument("--out")
    p.add_argument("--truth")
    p.add_argument("--no-validate", action="store_true")
    p.set_defaults(func=cmd_heuristic_ref)

    p = sub.add_parser("sr", help="baseline super-resolution anchored on a reference")
    _add_common(p)
    _add_reg(p)
    _add_heuristic(p)
    p.add_argument("--ref-method", default="similarity",
                   help="similarity | clearance | median | heuristic | fixed:<i>")
    p.add_argument("--refs", help="reference CSV overriding --ref-method")
    p.add_argument("--sr-method", choices=SR_METHODS, default="shift-and-add")
    p.add_argument("--out-dir")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_sr)

    p = sub.add_parser("eval", help="cPSNR of SR images against HR targets")
    _add_common(p)
    p.add_argument("--sr-dir", required=True)
    p.add_argument("--out")
    p.add_argument("--cpsnr-border", type=int, default=DEFAULT_BORDER)
    p.add_argument("--cpsnr-window", type=int, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="cross-tab of mean cPSNR by SR method and reference")
    _add_common(p, jobs=False)
    p.add_argument("--sr-root", help="directory holding <sr_method>/<ref>/<band>/summary.json")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be >= 1")
    try:
        return args.func(args, ["misr-refkit", *argv])
    except UsageError as exc:
        parser.error(str(exc))
    except (RefkitError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_FATAL
    return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
