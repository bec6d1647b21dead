"""Command-line orchestration of the pipeline over directories of files.

Subcommands: synth, coarse, buildlib, retrieve, eval, pipeline.  Exit
codes: 0 success, 1 internal error, 2 missing input, 3 empty library.
Per-image failures are logged and skipped; a run fails only when every
image fails.
"""

from __future__ import annotations

import argparse
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .coarse_mask import KMEANS_DIRECT, SPECTRAL, CoarseMaskParams, coarse_mask
from .errors import DegenerateMaskError, EmptyLibraryError, ProtosegError
from .metrics import evaluate_dataset, format_report
from .mining import build_libraries, format_build_report, mine_image
from .retrieval import ALL_VIEWS, RetrievalParams, View, build_index, mvkr_mask, upsample_mask
from .synth import CENTERED_RECT, RANDOM_BLOB, SynthSpec, write_dataset
from .tensor_store import read_fmap, read_plib, write_mask, write_plib

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_MISSING = 2
EXIT_EMPTY_LIBRARY = 3


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _require_dir(path, what) -> Path:
    path = Path(path)
    if not path.is_dir():
        raise CliError(f"{what} directory not found: {path}", EXIT_MISSING)
    return path


def _fmap_paths(fmap_dir: Path) -> list[Path]:
    paths = sorted(fmap_dir.glob("*.fmap"))
    if not paths:
        raise CliError(f"no .fmap files in {fmap_dir}", EXIT_MISSING)
    return paths


def _run_parallel(fn, items, workers):
    """Apply fn to items, preserving item order in the result list."""
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


class _MineTask:
    """Picklable per-image worker: coarse mask plus prototype record."""

    def __init__(self, params: CoarseMaskParams):
        self.params = params

    def __call__(self, path):
        try:
            fm = read_fmap(path)
            mask = coarse_mask(fm, self.params)
            try:
                record = mine_image(fm, self.params, mask=mask)
                return (fm.image_id, mask, record, None)
            except DegenerateMaskError as e:
                return (fm.image_id, mask, None, f"degenerate: {e}")
        except Exception as e:  # noqa: BLE001 - isolate per-image failures
            return (Path(path).stem, None, None, f"error: {e}")


class _RetrieveTask:
    def __init__(self, index, params: RetrievalParams):
        self.index = index
        self.params = params

    def __call__(self, path):
        try:
            fm = read_fmap(path)
            mask = mvkr_mask(fm, self.index, self.params)
            return (fm.image_id, upsample_mask(mask, fm.orig_h, fm.orig_w), None)
        except Exception as e:  # noqa: BLE001
            return (Path(path).stem, None, f"error: {e}")


def _write_log(out_dir: Path, lines):
    (out_dir / "run.log").write_text("\n".join(lines) + "\n", encoding="utf-8")


def _mine_pass(fmap_dir, out_dir, coarse_params, workers, log):
    paths = _fmap_paths(fmap_dir)
    coarse_dir = out_dir / "coarse"
    coarse_dir.mkdir(parents=True, exist_ok=True)
    results = _run_parallel(_MineTask(coarse_params), paths, workers)
    records, skipped = [], []
    for image_id, mask, record, err in results:
        if mask is not None:
            write_mask(coarse_dir / f"{image_id}.pgm", mask)
        if record is not None:
            records.append(record)
            log.append(f"{image_id}\tmined")
        else:
            skipped.append(image_id)
            log.append(f"{image_id}\t{err}")
    if not records:
        raise CliError("all images failed during mining", EXIT_EMPTY_LIBRARY)
    return records, skipped


def cmd_coarse(args) -> int:
    fmap_dir = _require_dir(args.fmap_dir, "feature map")
    out_dir = Path(args.out_dir)
    log: list[str] = []
    _mine_pass(fmap_dir, out_dir, _coarse_params(args), args.workers, log)
    _write_log(out_dir, log)
    return EXIT_OK


def cmd_buildlib(args) -> int:
    fmap_dir = _require_dir(args.fmap_dir, "feature map")
    out_dir = Path(args.out_dir)
    log: list[str] = []
    records, skipped = _mine_pass(fmap_dir, out_dir, _coarse_params(args), args.workers, log)
    try:
        fg_lib, bg_lib, report = build_libraries(records, args.bins, skipped=skipped)
    except EmptyLibraryError as e:
        raise CliError(str(e), EXIT_EMPTY_LIBRARY) from e
    libs_dir = out_dir / "libs"
    libs_dir.mkdir(parents=True, exist_ok=True)
    write_plib(libs_dir / "fg.plib", fg_lib)
    write_plib(libs_dir / "bg.plib", bg_lib)
    (libs_dir / "build_report.tsv").write_text(
        format_build_report(report, records), encoding="utf-8"
    )
    log.append(f"library\tkept {report.kept_images}/{report.total_images}"
               f"\tthreshold {report.threshold:.8f}")
    _write_log(out_dir, log)
    return EXIT_OK


def _retrieve_pass(fmap_dir, out_dir, retrieval_params, workers, log):
    paths = _fmap_paths(fmap_dir)
    libs_dir = out_dir / "libs"
    for name in ("fg.plib", "bg.plib"):
        if not (libs_dir / name).exists():
            raise CliError(f"prototype library not found: {libs_dir / name}", EXIT_MISSING)
    index = build_index(read_plib(libs_dir / "fg.plib"), read_plib(libs_dir / "bg.plib"))
    masks_dir = out_dir / "masks"
    masks_dir.mkdir(parents=True, exist_ok=True)
    n_ok = 0
    for image_id, mask, err in _run_parallel(_RetrieveTask(index, retrieval_params), paths, workers):
        if mask is None:
            log.append(f"{image_id}\t{err}")
        else:
            write_mask(masks_dir / f"{image_id}.pgm", mask)
            log.append(f"{image_id}\tretrieved")
            n_ok += 1
    if n_ok == 0:
        raise CliError("all images failed during retrieval", EXIT_INTERNAL)


def cmd_retrieve(args) -> int:
    fmap_dir = _require_dir(args.fmap_dir, "feature map")
    out_dir = Path(args.out_dir)
    log: list[str] = []
    _retrieve_pass(fmap_dir, out_dir, _retrieval_params(args), args.workers, log)
    _write_log(out_dir, log)
    return EXIT_OK


def cmd_eval(args) -> int:
    gt_dir = _require_dir(args.gt_dir, "ground truth")
    out_dir = Path(args.out_dir)
    masks_dir = _require_dir(out_dir / "masks", "predicted mask")
    ids = sorted(p.stem for p in masks_dir.glob("*.pgm"))
    if not ids:
        raise CliError(f"no predicted masks in {masks_dir}", EXIT_MISSING)
    try:
        report = evaluate_dataset(ids, masks_dir, gt_dir)
    except FileNotFoundError as e:
        raise CliError(str(e), EXIT_MISSING) from e
    (out_dir / "report.tsv").write_text(format_report(report), encoding="utf-8")
    print(f"mean_mae={report.mean_mae:.6f} mean_iou={report.mean_iou:.6f} "
          f"mean_f={report.mean_f:.6f}")
    return EXIT_OK


def cmd_pipeline(args) -> int:
    fmap_dir = _require_dir(args.fmap_dir, "feature map")
    out_dir = Path(args.out_dir)
    log: list[str] = []
    records, skipped = _mine_pass(fmap_dir, out_dir, _coarse_params(args), args.workers, log)
    try:
        fg_lib, bg_lib, report = build_libraries(records, args.bins, skipped=skipped)
    except EmptyLibraryError as e:
        raise CliError(str(e), EXIT_EMPTY_LIBRARY) from e
    libs_dir = out_dir / "libs"
    libs_dir.mkdir(parents=True, exist_ok=True)
    write_plib(libs_dir / "fg.plib", fg_lib)
    write_plib(libs_dir / "bg.plib", bg_lib)
    (libs_dir / "build_report.tsv").write_text(
        format_build_report(report, records), encoding="utf-8"
    )
    log.append(f"library\tkept {report.kept_images}/{report.total_images}"
               f"\tthreshold {report.threshold:.8f}")
    _retrieve_pass(fmap_dir, out_dir, _retrieval_params(args), args.workers, log)
    _write_log(out_dir, log)
    if args.gt_dir:
        return cmd_eval(args)
    return EXIT_OK


def cmd_synth(args) -> int:
    spec = SynthSpec(
        num_images=args.num_images,
        h=args.height,
        w=args.width,
        d=args.dim,
        intra_sim=args.intra_sim,
        dataset_sep=args.dataset_sep,
        noise_sigma=args.noise_sigma,
        fg_shape=args.fg_shape,
        artifact_rate=args.artifact_rate,
        seed=args.seed,
    )
    manifest = write_dataset(spec, args.out_dir)
    print(f"wrote {spec.num_images} images, manifest at {manifest}")
    return EXIT_OK


def _coarse_params(args) -> CoarseMaskParams:
    return CoarseMaskParams(
        method=args.method,
        eig_count=args.eig_count,
        kmeans_seed=args.seed,
        border_width=args.border_width,
    )


def _parse_views(text: str) -> tuple[View, ...]:
    try:
        return tuple(View(v.strip()) for v in text.split(","))
    except ValueError as e:
        raise CliError(f"bad view list {text!r}: {e}", EXIT_INTERNAL) from e


def _retrieval_params(args) -> RetrievalParams:
    return RetrievalParams(
        top_k=args.top_k,
        views=_parse_views(args.views),
        fg_tie_break=args.fg_tie_break,
    )


def _add_common(p):
    p.add_argument("--fmap-dir", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)


def _add_coarse_flags(p):
    p.add_argument("--method", choices=[SPECTRAL, KMEANS_DIRECT], default=SPECTRAL)
    p.add_argument("--eig-count", type=int, default=2)
    p.add_argument("--border-width", type=int, default=1)


def _add_retrieval_flags(p):
    p.add_argument("--top-k", type=int, default=512)
    p.add_argument("--views", default=",".join(v.value for v in ALL_VIEWS))
    p.add_argument("--fg-tie-break", action=argparse.BooleanOptionalAction, default=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="protoseg",
        description="Pseudo-mask generation via dataset-level prototype retrieval",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("coarse", help="per-image coarse masks only")
    _add_common(p)
    _add_coarse_flags(p)
    p.set_defaults(fn=cmd_coarse)

    p = sub.add_parser("buildlib", help="mine prototypes and build the libraries")
    _add_common(p)
    _add_coarse_flags(p)
    p.add_argument("--bins", type=int, default=50)
    p.set_defaults(fn=cmd_buildlib)

    p = sub.add_parser("retrieve", help="multi-view KNN retrieval with existing libraries")
    _add_common(p)
    _add_retrieval_flags(p)
    p.set_defaults(fn=cmd_retrieve)

    p = sub.add_parser("eval", help="score predicted masks against ground truth")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--gt-dir", required=True)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("pipeline", help="coarse+mine, build libraries, retrieve, eval")
    _add_common(p)
    _add_coarse_flags(p)
    _add_retrieval_flags(p)
    p.add_argument("--bins", type=int, default=50)
    p.add_argument("--gt-dir", default=None)
    p.set_defaults(fn=cmd_pipeline)

    p = sub.add_parser("synth", help="generate a synthetic camouflage dataset")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--num-images", type=int, default=100)
    p.add_argument("--height", type=int, default=16)
    p.add_argument("--width", type=int, default=16)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--intra-sim", type=float, default=0.9)
    p.add_argument("--dataset-sep", type=float, default=0.1)
    p.add_argument("--noise-sigma", type=float, default=0.05)
    p.add_argument("--fg-shape", choices=[CENTERED_RECT, RANDOM_BLOB], default=CENTERED_RECT)
    p.add_argument("--artifact-rate", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except ProtosegError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception:  # noqa: BLE001
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
