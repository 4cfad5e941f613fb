"""Command-line interface: ``signcore {gen-data,train,eval,compare,predict}``.

Exit codes: 0 success, 2 usage or input error, 3 numeric failure.
Flags may also come from ``--config FILE``: flat ``key = value`` lines with
``#`` comments, keys named like the long flags (``train-fraction = 0.8``).
Explicit flags override the file.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .augment import AugmentConfig, augment_training_set
from .baselines import Kernel, default_gamma, featurize_all, knn_fit, svm_fit
from .binio import ModelFormatError
from .data import (
    DatasetError,
    RasterError,
    TestSplit,
    load_dataset,
    prepare_image,
    read_image,
    split_train_test,
    synth_generate,
    write_dataset,
)
from .nn import (
    Metrics,
    NumericalError,
    TrainConfig,
    build_sign_network,
    evaluate,
    load_model,
    save_model,
    train,
)
from .nn.train import STREAM_INIT
from .tensor import Rng

log = logging.getLogger("signcore")

SCHEMA_VERSION = 1
EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3

REFERENCE_RATES = {
    "label": "paper reference (proprietary dataset)",
    "detection_rates": {"cnn": 0.9003, "svm_linear": 0.86, "svm_rbf": 0.85, "knn": 0.68},
}
CLASSIFIER_TITLES = {
    "cnn": "CNN (two conv layers)",
    "svm_linear": "SVM, linear kernel",
    "svm_rbf": "SVM, RBF kernel",
    "knn": "KNN, Euclidean",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# ------------------------------------------------------------------ args

def _size(text: str):
    parts = text.lower().replace("x", ",").split(",")
    try:
        dims = tuple(int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad size {text!r}; use N or HxW") from None
    if len(dims) == 1:
        dims = dims * 2
    if len(dims) != 2 or min(dims) < 1:
        raise argparse.ArgumentTypeError(f"bad size {text!r}; use N or HxW")
    return dims


def _range(text: str):
    try:
        lo, hi = (float(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad range {text!r}; use LO,HI") from None
    return (lo, hi)


def _common(p, data=True):
    p.add_argument("--config", help="key = value config file (flags override it)")
    p.add_argument("--seed", type=int, default=0)
    if data:
        p.add_argument("--data", help="dataset root (<root>/<class>/<image>.pgm|ppm)")
    p.add_argument("-v", "--verbose", action="store_true")


def _training_flags(p):
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--epochs", type=int, default=15)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--learning-rate", "--lr", type=float, default=0.01)
    p.add_argument("--size", type=_size, help="resize images to N or HxW (default: first image's size)")
    p.add_argument("--channels", type=int, choices=(1, 3), default=1)
    p.add_argument("--augment-copies", type=int, default=0,
                   help="augmented copies per training image, added to the originals (0 disables)")
    p.add_argument("--rotation-range", type=_range, default=(0.0, 360.0))
    p.add_argument("--shear-range", type=float, default=0.2)
    p.add_argument("--flip-probability", type=float, default=0.5)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="signcore", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"signcore {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    parser.subcommands = sub.choices

    p = sub.add_parser("gen-data", help="write the synthetic glyph dataset")
    _common(p, data=False)
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--per-class", type=int, default=100)
    p.add_argument("--size", type=_size, default=(28, 28))
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train the CNN and save it")
    _common(p)
    _training_flags(p)
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--report", help="JSON report (default: <out>.report.json)")
    p.add_argument("--history", help="per-epoch CSV (default: <out>.history.csv)")
    p.add_argument("--manifest", help="held-out file list (default: <out>.test.txt)")

    p = sub.add_parser("eval", help="evaluate a saved model")
    _common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", help="restrict to the files listed (one <class>/<file> per line)")
    p.add_argument("--report")

    p = sub.add_parser("compare", help="CNN vs KNN vs SVM on one split")
    _common(p)
    _training_flags(p)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--svm-c", type=float, default=1.0)
    p.add_argument("--svm-tol", type=float, default=1e-3)
    p.add_argument("--svm-max-passes", type=int, default=50)
    p.add_argument("--gamma", type=float, help="RBF gamma (default 1 / (n_features * variance))")
    p.add_argument("--out", help="optional model file for the CNN")
    p.add_argument("--report")

    p = sub.add_parser("predict", help="classify one image")
    _common(p, data=False)
    p.add_argument("--model", required=True)
    p.add_argument("--image", required=True)
    return parser


def _read_config(path) -> dict:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def parse_args(argv):
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    command = next((a for a in argv if a in parser.subcommands), None)
    if known.config and command:
        try:
            values = _read_config(known.config)
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        sub = parser.subcommands[command]
        actions = {a.dest: a for a in sub._actions}
        defaults = {}
        for key, value in values.items():
            if key not in actions or key in ("config", "help"):
                raise UsageError(f"unknown config key {key!r} for {command}")
            action = actions[key]
            try:
                if action.nargs == 0:  # store_true flags
                    defaults[key] = value.lower() in ("1", "true", "yes", "on")
                else:
                    defaults[key] = action.type(value) if action.type else value
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"config key {key!r}: {exc}") from None
            if action.choices is not None and defaults[key] not in action.choices:
                raise UsageError(f"config key {key!r}: {value!r} not in {list(action.choices)}")
            action.required = False
        sub.set_defaults(**defaults)
    return parser.parse_args(argv)


# ------------------------------------------------------------- pipeline

def _configs(args):
    try:
        tc = TrainConfig(
            epochs=args.epochs,
            batch_size=args.batch_size,
            learning_rate=args.learning_rate,
            seed=args.seed,
            split_ratio=args.train_fraction,
        )
        ac = None
        if args.augment_copies < 0:
            raise ValueError("augment-copies must be >= 0")
        if args.augment_copies:
            ac = AugmentConfig(
                rotation_range_deg=args.rotation_range,
                shear_range=args.shear_range,
                hflip_probability=args.flip_probability,
                copies_per_image=args.augment_copies,
            )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return tc, ac


def _require_data(args):
    if not args.data:
        raise UsageError("--data is required")
    return load_dataset(args.data, args.size, args.channels)


def _prepare_split(args):
    tc, ac = _configs(args)
    ds = _require_data(args)
    try:
        train_set, test_set = split_train_test(ds, tc.split_ratio, tc.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    fit_set = train_set
    if ac is not None:
        fit_set = augment_training_set(train_set, ac, tc.seed)
    return tc, ac, ds, train_set, fit_set, test_set


def _train_cnn(tc, ds, fit_set):
    net = build_sign_network(ds.image_shape, ds.n_classes, Rng(tc.seed, STREAM_INIT), ds.class_names)
    log.info("network %r (%d parameters)", net, net.n_parameters())
    return train(net, fit_set, tc)


def _config_echo(args) -> dict:
    out = {}
    for key, value in sorted(vars(args).items()):
        if key in ("verbose",):
            continue
        out[key] = list(value) if isinstance(value, tuple) else value
    return out


def _report(command, args, metrics: dict, started, **extra) -> dict:
    rep = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": _config_echo(args),
        "seed": args.seed,
        "wall_clock_seconds": round(time.perf_counter() - started, 3),
        "metrics": {k: m.to_dict() for k, m in metrics.items()},
    }
    rep.update(extra)
    return rep


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# -------------------------------------------------------------- commands

def cmd_gen_data(args) -> int:
    try:
        ds = synth_generate(args.classes, args.per_class, args.size, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = Path(args.out)
    try:
        write_dataset(ds, out)
    except OSError as exc:
        print(f"error: cannot write dataset to {out}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    manifest = {
        "out": str(out),
        "classes": ds.class_names,
        "counts": ds.class_counts(),
        "size": list(args.size),
        "seed": args.seed,
    }
    print(json.dumps(manifest))
    return EXIT_OK


def cmd_train(args) -> int:
    started = time.perf_counter()
    tc, ac, ds, train_set, fit_set, test_set = _prepare_split(args)
    net, history = _train_cnn(tc, ds, fit_set)
    metrics = evaluate(net, test_set)
    out = Path(args.out)
    save_model(net, out)
    history_path = args.history or f"{out}.history.csv"
    Path(history_path).write_text(history.to_csv())
    manifest_path = args.manifest or f"{out}.test.txt"
    Path(manifest_path).write_text("".join(f"{s.source}\n" for s in test_set.samples))
    report = _report(
        "train", args, {"cnn": metrics}, started,
        class_names=ds.class_names,
        history=[{"epoch": e.epoch, "loss": e.loss, "train_acc": e.train_acc} for e in history.epochs],
    )
    report_path = args.report or f"{out}.report.json"
    _write_json(report_path, report)
    print(f"detection_rate {metrics.detection_rate:.4f} on {len(test_set)} held-out images; "
          f"model {out}, report {report_path}")
    return EXIT_OK


def cmd_eval(args) -> int:
    started = time.perf_counter()
    net = load_model(args.model)
    if not args.data:
        raise UsageError("--data is required")
    h, w, c = net.input_shape
    ds = load_dataset(args.data, (h, w), c)
    if ds.class_names != net.class_names:
        raise UsageError(f"dataset classes {ds.class_names} differ from model classes {net.class_names}")
    samples = ds.samples
    if args.manifest:
        wanted = [line.strip() for line in Path(args.manifest).read_text().splitlines() if line.strip()]
        by_source = {s.source: s for s in samples}
        missing = [x for x in wanted if x not in by_source]
        if missing:
            raise UsageError(f"{len(missing)} manifest entries not found, e.g. {missing[0]}")
        samples = [by_source[x] for x in wanted]
    metrics = evaluate(net, TestSplit(samples, ds.class_names))
    report = _report("eval", args, {"cnn": metrics}, started, class_names=ds.class_names)
    if args.report:
        _write_json(args.report, report)
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_compare(args) -> int:
    started = time.perf_counter()
    tc, ac, ds, train_set, fit_set, test_set = _prepare_split(args)
    net, _ = _train_cnn(tc, ds, fit_set)
    if args.out:
        save_model(net, args.out)
    metrics = {"cnn": evaluate(net, test_set)}

    x_train, y_train = featurize_all(train_set.samples)
    x_test, y_test = featurize_all(test_set.samples)
    n_classes = ds.n_classes
    try:
        knn = knn_fit(x_train, y_train, args.k, n_classes)
        gamma = args.gamma if args.gamma is not None else default_gamma(x_train)
        kernels_ = {"svm_linear": Kernel("linear"), "svm_rbf": Kernel("rbf", gamma)}
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    metrics["knn"] = Metrics.from_predictions(y_test, knn.predict(x_test), n_classes)
    for name, kernel in kernels_.items():
        model = svm_fit(x_train, y_train, kernel, args.svm_c, args.svm_tol, args.svm_max_passes, n_classes)
        metrics[name] = Metrics.from_predictions(y_test, model.predict(x_test), n_classes)

    order = ["cnn", "svm_linear", "svm_rbf", "knn"]
    metrics = {k: metrics[k] for k in order}
    ref = REFERENCE_RATES["detection_rates"]
    print(f"{'classifier':<24}{'detection rate':>16}   {REFERENCE_RATES['label']}")
    for k in order:
        print(f"{CLASSIFIER_TITLES[k]:<24}{metrics[k].detection_rate:>16.4f}   {ref[k]:.4f}")
    report = _report("compare", args, metrics, started,
                     class_names=ds.class_names, reference_rates=REFERENCE_RATES)
    if args.report:
        _write_json(args.report, report)
    return EXIT_OK


def cmd_predict(args) -> int:
    net = load_model(args.model)
    image = read_image(args.image)
    h, w, c = net.input_shape
    if image.shape[:2] != (h, w) or image.shape[2] != c:
        print(f"warning: image {list(image.shape)} resized to {[h, w, c]}", file=sys.stderr)
    image = prepare_image(image, (h, w), c)
    probs = net.predict_proba(image)
    idx = int(np.argmax(probs))
    print(json.dumps({
        "class_index": idx,
        "class_name": net.class_names[idx],
        "probabilities": {name: float(p) for name, p in zip(net.class_names, probs)},
    }, indent=2))
    return EXIT_OK


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "eval": cmd_eval,
    "compare": cmd_compare,
    "predict": cmd_predict,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ModelFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, DatasetError, RasterError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
