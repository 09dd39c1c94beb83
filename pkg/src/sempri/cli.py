"""Command-line entry points: ``train``, ``infer``, ``eval`` and ``synth``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
``SEMPRI_LOG`` sets the log level (e.g. ``DEBUG``); the default is ``WARNING``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

from joblib import Parallel, delayed

from .exceptions import DataError, InvariantError
from .io import atomic_write_bytes, load_entry, parse_manifest, write_label_png, write_saliency_map
from .metrics import evaluate_dataset
from .pipeline import PipelineConfig, SemanticPriorSaliency
from .synth import write_dataset

log = logging.getLogger("sempri")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3
TRAINING_LOG = "training_log.json"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class _LazyColumn:
    """Index-addressable view loading one field of each manifest entry on demand."""

    def __init__(self, manifest, n_classes, field):
        self._entries = manifest.entries
        self._n_classes = n_classes
        self._field = field

    def __len__(self):
        return len(self._entries)

    def __getitem__(self, i):
        return load_entry(self._entries[i], self._n_classes, need_mask=self._field == 2)[self._field]


def _config(args) -> PipelineConfig:
    cfg = PipelineConfig.from_json(args.config) if args.config else PipelineConfig()
    return cfg.updated(seed=args.seed, jobs=args.jobs)


def _workers(cfg: PipelineConfig) -> int:
    return cfg.jobs or os.cpu_count() or 1


def cmd_train(args) -> int:
    cfg = _config(args)
    manifest = parse_manifest(args.manifest, split="train")
    if len(manifest) == 0:
        raise DataError(f"{args.manifest}: manifest has no entries")
    # validate every entry up front so failures name the entry before any work
    for entry in manifest:
        load_entry(entry, cfg.n_classes, need_mask=True)

    t0 = time.perf_counter()
    est = cfg.estimator()
    est.fit(*(_LazyColumn(manifest, cfg.n_classes, f) for f in range(3)))
    paths = est.save(args.out, cfg)
    summary = dict(est.training_summary_)
    summary.update(
        manifest=str(Path(args.manifest).resolve()),
        seconds=round(time.perf_counter() - t0, 3),
        config=json.loads(cfg.to_json()),
        artifacts={k: str(v) for k, v in paths.items()},
    )
    atomic_write_bytes(Path(args.out) / TRAINING_LOG, (json.dumps(summary, indent=2) + "\n").encode("utf-8"))
    log.info("trained on %d images: %d samples", summary["n_images"], summary["n_samples"])
    return EXIT_OK


def _infer_entry(est, entry, n_classes, out_dir: Path, intermediates: bool, superpixel_dir):
    image, scores, _ = load_entry(entry, n_classes)
    result = est.predict_components(image, scores)
    write_saliency_map(result.fused, out_dir / f"{entry.stem}.png")
    if intermediates:
        write_saliency_map(result.explicit, out_dir / f"{entry.stem}_explicit.png")
        write_saliency_map(result.implicit, out_dir / f"{entry.stem}_implicit.png")
    if superpixel_dir is not None:
        write_label_png(result.segmentation.labels, Path(superpixel_dir) / f"{entry.stem}.png")
    return entry.stem, result.alpha


def cmd_infer(args) -> int:
    cfg = _config(args)
    est = SemanticPriorSaliency.load(args.artifacts, cfg)
    est.set_params(n_jobs=1)
    manifest = parse_manifest(args.manifest, split="test")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.save_superpixels:
        Path(args.save_superpixels).mkdir(parents=True, exist_ok=True)
    jobs = min(_workers(cfg), max(len(manifest), 1))
    done = Parallel(n_jobs=jobs)(
        delayed(_infer_entry)(est, e, cfg.n_classes, out_dir, args.save_intermediates, args.save_superpixels)
        for e in manifest
    )
    for stem, alpha in done:
        log.info("%s: alpha=%.4f", stem, alpha)
    return EXIT_OK


def cmd_eval(args) -> int:
    manifest = parse_manifest(args.manifest, split="test")
    if len(manifest) == 0:
        raise DataError(f"{args.manifest}: manifest has no entries")
    report = evaluate_dataset(args.maps, manifest)
    report.write_csv(args.out)
    print(f"images={report.n_images} F={report.f_measure:.4f} MAE={report.mae:.4f}")
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = _config(args)
    if args.count < 1:
        raise DataError("--count must be >= 1")
    write_dataset(args.out, args.count, cfg.seed, cfg.n_classes, split=args.split, prefix=args.prefix)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="JSON file of pipeline settings")
    shared.add_argument("--seed", type=int, help="random seed (overrides the config)")
    shared.add_argument("--jobs", type=int, help="worker processes (default: logical cores)")
    shared.add_argument(
        "--save-intermediates", action="store_true", help="infer: also write explicit and implicit maps"
    )
    shared.add_argument("--save-superpixels", metavar="DIR", help="infer: write superpixel label maps as 16-bit PNGs")

    parser = _Parser(prog="sempri", description="Semantic-prior salient object detection.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", parents=[shared], help="learn priors, textons and the forest")
    p.add_argument("manifest")
    p.add_argument("--out", required=True, help="artifact directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", parents=[shared], help="write saliency maps for a manifest")
    p.add_argument("manifest")
    p.add_argument("--artifacts", required=True, help="directory written by train")
    p.add_argument("--out", required=True, help="output directory for PNG maps")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", parents=[shared], help="score saliency maps against masks")
    p.add_argument("maps", help="directory of <stem>.png maps")
    p.add_argument("manifest")
    p.add_argument("--out", required=True, help="report CSV path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", parents=[shared], help="generate a synthetic dataset")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", choices=("train", "test"), default="train")
    p.add_argument("--prefix", default="scene")
    p.set_defaults(func=cmd_synth)
    return parser


def _setup_logging() -> None:
    level = os.environ.get("SEMPRI_LOG", "WARNING").upper()
    if not isinstance(logging.getLevelName(level), int):
        level = "WARNING"
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    if args.jobs is not None and args.jobs < 1:
        print("sempri: error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except InvariantError as exc:
        print(f"sempri: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (DataError, OSError, json.JSONDecodeError) as exc:
        print(f"sempri: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:
        log.debug("unhandled", exc_info=True)
        print(f"sempri: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
