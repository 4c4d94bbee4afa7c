"""Command-line interface: ``ihif <command> ...``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from .dataset import load_image, resize
from .errors import DataError, IhifError, NumericalError, StageError
from .gabor import dump_responses, magnitude_responses, make_bank
from .harness.config import KNOWN_KEYS, ExperimentConfig, dump_config, load_config

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for data errors here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _overrides(args) -> dict[str, str]:
    values = {}
    for item in getattr(args, "set", None) or []:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise UsageError(f"--set expects key=value, got {item!r}")
        if key.strip() not in KNOWN_KEYS:
            raise UsageError(f"--set: unknown key {key.strip()!r}")
        values[key.strip()] = value.strip()
    if getattr(args, "block_size", None) is not None:
        values["features.block_size"] = str(args.block_size)
    if getattr(args, "metric", None) is not None:
        values["classifier.metric"] = args.metric
    if getattr(args, "seed", None) is not None:
        values["split.seed"] = str(args.seed)
        values["ica.seed"] = str(args.seed)
    if getattr(args, "strict", False):
        values["ica.strict"] = "true"
    return values


def _config(args) -> ExperimentConfig:
    return load_config(args.config, _overrides(args))


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="experiment config file (key = value)")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override one config key; repeatable")
    p.add_argument("--block-size", type=int, help="block side W (features.block_size)")
    p.add_argument("--metric", choices=("cosine", "l2"), help="classifier.metric")
    p.add_argument("--seed", type=int, help="seed for both split.seed and ica.seed")
    p.add_argument("--strict", action="store_true", help="non-convergence is an error (exit 3)")


def _add_jobs(p: argparse.ArgumentParser) -> None:
    p.add_argument("--jobs", type=int, default=1, help="worker threads for per-image work")


def cmd_extract(args) -> int:
    from .harness.pipeline import extract_matrix

    cfg = _config(args)
    items, vectors = extract_matrix(cfg, jobs=args.jobs)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for it, vec in zip(items, vectors):
            writer.writerow([it.subject_id] + [repr(float(v)) for v in vec])
    if args.dump_responses:
        bank = make_bank(cfg.gabor)
        root = Path(args.dump_responses)
        for it in items:
            dump_responses(magnitude_responses(it.image, bank),
                           root / it.subject_id / Path(it.source).stem)
    print(f"wrote {len(items)} feature vectors of length {vectors.shape[1]} to {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    from .harness.persistence import save_model
    from .harness.pipeline import run_training

    cfg = _config(args)
    bundle = run_training(cfg, jobs=args.jobs)
    save_model(bundle, args.model)
    print(f"trained {len(bundle.classes.labels)} classes, {bundle.ica.n_ics} components, "
          f"threshold {bundle.classes.threshold!r}; model written to {args.model}")
    return EXIT_OK


def cmd_classify(args) -> int:
    from .harness.persistence import load_model

    bundle = load_model(args.model)
    img = load_image(args.image)
    if (img.width, img.height) != (bundle.width, bundle.height):
        img = resize(img, bundle.width, bundle.height)
    d = bundle.classify(img)
    print(f"label: {d.label}")
    print(f"score: {d.score!r}")
    print(f"accepted: {str(d.accepted).lower()}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    from .harness.persistence import load_model
    from .harness.pipeline import prepare_split, run_evaluation
    from .harness.report import summary_text, write_report

    bundle = load_model(args.model)
    cfg = _config(args)
    if (cfg.width, cfg.height) != (bundle.width, bundle.height):
        raise DataError(f"config geometry {cfg.width}x{cfg.height} does not match the model "
                        f"({bundle.width}x{bundle.height})")
    _, positive, negative = prepare_split(cfg)
    ev = run_evaluation(bundle, positive, negative, jobs=args.jobs)
    write_report(ev, args.report, threshold=bundle.classes.threshold,
                 metric=bundle.classes.metric, svg=args.svg)
    sys.stdout.write(summary_text(ev, bundle.classes.threshold, bundle.classes.metric))
    return EXIT_OK


def cmd_bss_demo(args) -> int:
    from .harness.bss import bss_demo

    report = bss_demo(args.sources, args.samples, args.seed, distribution=args.distribution)
    print("\n".join(report.lines()))
    return EXIT_OK


def cmd_synth(args) -> int:
    from .harness.synthetic import synthetic_config, texture_dataset, write_dataset

    out = Path(args.out)
    data = texture_dataset(size=args.size, seed=args.seed)
    root = write_dataset(data, out / "images")
    cfg = synthetic_config(data, seed=args.seed, dataset_root=Path(root.name))
    (out / "experiment.cfg").write_text(dump_config(cfg), encoding="utf-8")
    print(f"wrote {len(data)} images under {root} and {out / 'experiment.cfg'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ihif", description="Gabor high-intensity features with ICA.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("extract", help="write one feature vector per image as CSV")
    _add_config_flags(p)
    _add_jobs(p)
    p.add_argument("--out", required=True, help="output CSV: subject_id, then values")
    p.add_argument("--dump-responses", metavar="DIR",
                   help="also write every response magnitude as an 8-bit PGM")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="fit a model and save it")
    _add_config_flags(p)
    _add_jobs(p)
    p.add_argument("--model", required=True, help="output model file")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("classify", help="classify one image")
    p.add_argument("--model", required=True)
    p.add_argument("--image", required=True)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("evaluate", help="score the test split and write a report")
    p.add_argument("--model", required=True)
    _add_config_flags(p)
    _add_jobs(p)
    p.add_argument("--report", required=True, help="report directory")
    p.add_argument("--svg", action="store_true", help="also write a sensitivity/specificity chart")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bss-demo", help="separate known synthetic mixtures")
    p.add_argument("--sources", type=int, required=True)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--distribution", choices=("mixed", "uniform", "laplace"), default="mixed")
    p.set_defaults(func=cmd_bss_demo)

    p = sub.add_parser("synth", help="write a synthetic texture dataset and a matching config")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=int, default=20)
    p.set_defaults(func=cmd_synth)
    return parser


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, StageError) and exc.cause is not None:
        exc = exc.cause
    if isinstance(exc, (NumericalError, np.linalg.LinAlgError)):
        return EXIT_NUMERICAL
    return EXIT_DATA


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be >= 1")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"ihif: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IhifError, ValueError, ArithmeticError, OSError, np.linalg.LinAlgError) as exc:
        print(f"ihif: error: {exc}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
