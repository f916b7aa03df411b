"""Command-line surface: preprocess, merge, train, train-multi, eval,
eval-multi, predict, groups, serve.

Training defaults are the reference setup (5 folds, 30 epochs, batch 128,
lr 0.001); --quick swaps in the desk-scale network (filters 8/16/24/32) and
3 epochs so the pipeline runs in CI time. Exit codes: 0 success, 1 data or
runtime error, 2 usage error (argparse).
"""

from __future__ import annotations

import argparse
import sys

import qalam  # noqa: F401  (applies QALAM_THREADS before numpy loads)
import numpy as np

from . import data as qdata
from . import metrics, model, strokes


def _log(msg: str):
    print(msg, flush=True)


def _label_map_for(classes: int) -> qdata.LabelMap:
    if classes == 29:
        return qdata.HIJJA_LABELS
    if classes == 28:
        return qdata.AHCD_LABELS
    if classes == 8:
        return qdata.GLYPH_LABELS
    raise SystemExit(f"error: unsupported class count {classes} (use 28, 29, or 8)")


def _load_dataset(args) -> qdata.Dataset:
    if getattr(args, "synthetic", False):
        ds = qdata.synthetic_glyphs(per_class=args.per_class, seed=args.seed)
        _log(f"synthetic dataset: {len(ds)} samples, {len(ds.label_map)} classes")
        return ds
    ds = qdata.load_csv(args.data, label_map=_label_map_for(args.classes))
    _log(f"loaded {args.data}: {len(ds)} samples, {len(ds.label_map)} classes")
    return ds


def _print_histogram(ds: qdata.Dataset):
    counts = ds.class_counts()
    for i, n in enumerate(counts):
        if n:
            _log(f"  {ds.label_map.display(i)}: {n}")


def cmd_preprocess(args) -> int:
    ds = qdata.load_csv(args.input, transpose=args.transpose, has_header=args.header,
                        label_map=_label_map_for(args.classes))
    if args.invert:
        ds = qdata.invert(ds)
    qdata.write_csv(ds, args.output)
    _log(f"wrote {args.output}: {len(ds)} samples")
    _print_histogram(ds)
    return 0


def cmd_merge(args) -> int:
    a = qdata.load_csv(args.a, label_map=_label_map_for(args.classes_a))
    b = qdata.load_csv(args.b, label_map=_label_map_for(args.classes_b))
    merged = qdata.merge(a, b)
    qdata.write_csv(merged, args.output)
    _log(f"wrote {args.output}: {len(merged)} samples ({len(a)} + {len(b)})")
    _print_histogram(merged)
    return 0


def _resolve_train_configs(args, classes: int) -> tuple[model.TrainConfig, model.NetworkConfig]:
    epochs = args.epochs if args.epochs is not None else (3 if args.quick else 30)
    tcfg = model.TrainConfig(folds=args.folds, batch=args.batch, epochs=epochs,
                             seed=args.seed, lr=args.lr)
    ncfg = model.quick_config(classes) if args.quick else model.NetworkConfig(classes=classes)
    _log(f"seed: {tcfg.seed}")
    _log(f"train config: folds={tcfg.folds} epochs={tcfg.epochs} "
         f"batch={tcfg.batch} lr={tcfg.lr} decay_exponent={tcfg.decay_exponent}")
    _log(f"network config: blocks={ncfg.blocks} fc={ncfg.fc} classes={ncfg.classes} "
         f"dropout={ncfg.dropout} leaky_slope={ncfg.leaky_slope}")
    return tcfg, ncfg


def cmd_train(args) -> int:
    ds = _load_dataset(args)
    tcfg, ncfg = _resolve_train_configs(args, len(ds.label_map))
    bundle = model.train(ds, tcfg, ncfg, log=_log)
    model.save(bundle, args.out)
    for i, acc in enumerate(bundle.fold_accuracies):
        _log(f"fold {i + 1} validation accuracy: {acc:.4f}")
    _log(f"best fold: {bundle.best_fold + 1} "
         f"({bundle.fold_accuracies[bundle.best_fold]:.4f})")
    _log(f"wrote {args.out}")
    return 0


def cmd_train_multi(args) -> int:
    ds = _load_dataset(args)
    tcfg, ncfg = _resolve_train_configs(args, 29)
    bundle = strokes.train_multi(ds, tcfg, ncfg, log=_log)
    strokes.save_multi(bundle, args.out)
    for g in sorted(bundle.models):
        accs = bundle.models[g].fold_accuracies
        _log(f"group {g} best fold accuracy: {max(accs):.4f}")
    _log(f"wrote {args.out}")
    return 0


def cmd_eval(args) -> int:
    bundle = model.load(args.model)
    # loading with the model's own label map rejects out-of-range labels,
    # so data from a different class universe fails with a row-numbered error
    ds = qdata.load_csv(args.data, label_map=qdata.LabelMap(bundle.label_names))
    x, _ = qdata.normalize_for_training(ds)
    preds = bundle.network.predict_proba(x).argmax(axis=1)
    cm = metrics.confusion(ds.labels, preds, bundle.config.classes)
    rep = metrics.report(cm, ds.label_map)
    text = metrics.render_report(rep, ds.label_map)
    _log(text)
    _log(f"\naccuracy: {rep.accuracy:.4f}")
    if args.report:
        with open(args.report, "w") as f:
            f.write(text + "\n")
        _log(f"wrote {args.report}")
    if args.csv:
        with open(args.csv, "w") as f:
            f.write(metrics.render_report_csv(rep, ds.label_map) + "\n")
        _log(f"wrote {args.csv}")
    return 0


def cmd_eval_multi(args) -> int:
    bundle = strokes.load_multi(args.model)
    ds = qdata.load_csv(args.data, label_map=qdata.HIJJA_LABELS)
    ev = strokes.evaluate_multi(bundle, ds)
    for g in sorted(ev.reports):
        group_map = qdata.LabelMap(strokes.GROUPS[g])
        _log(f"--- group {g} ({len(group_map)} classes) ---")
        _log(metrics.render_report(ev.reports[g], group_map))
        _log("")
    accs = ", ".join(f"group {g}: {a:.4f}" for g, a in sorted(ev.group_accuracies.items()))
    _log(accs)
    _log(f"averaged accuracy: {ev.averaged_accuracy:.4f} "
         f"(support-weighted: {ev.weighted_accuracy:.4f})")
    return 0


def _read_image(path) -> np.ndarray:
    with open(path) as f:
        fields = f.read().replace("\n", ",").split(",")
    values = [int(v) for v in fields if v.strip()]
    if len(values) != qdata.PIXELS:
        raise SystemExit(f"error: image file must hold exactly {qdata.PIXELS} "
                         f"pixel values, got {len(values)}")
    arr = np.array(values, dtype=np.int64)
    if arr.min() < 0 or arr.max() > 255:
        raise SystemExit("error: pixel values must be 0-255")
    return arr.reshape(qdata.IMAGE_SIZE, qdata.IMAGE_SIZE).astype(np.float32) / 255.0


def _print_top5(names, probs):
    order = np.argsort(probs)[::-1][:5]
    for rank, i in enumerate(order, start=1):
        _log(f"  {rank}. {names[i]} {probs[i]:.4f}")


def cmd_predict(args) -> int:
    image = _read_image(args.image)
    if args.multi:
        bundle = strokes.load_multi(args.multi)
        if args.strokes is None:
            raise SystemExit("error: --strokes is required with --multi")
        pred = strokes.predict_multi(bundle, image, args.strokes)
        _log(f"group: {pred.group}")
        _log(f"label: {pred.label}")
        _print_top5(pred.classes, pred.probabilities)
    else:
        bundle = model.load(args.model)
        idx, probs = model.predict(bundle.network, image)
        _log(f"label: {bundle.label_names[idx]}")
        _print_top5(bundle.label_names, probs)
    return 0


def cmd_groups(args) -> int:
    _log(f"stroke group table v{strokes.GROUP_TABLE_VERSION}")
    _log(strokes.render_groups())
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    single = model.load(args.model) if args.model else None
    multi = strokes.load_multi(args.multi) if args.multi else None
    if single:
        _log(f"single model: {args.model} ({single.config.classes} classes)")
    if multi:
        _log(f"multi-model bundle: {args.multi}")
    app = create_app(single=single, multi=multi)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def _add_train_flags(p: argparse.ArgumentParser, multi: bool = False):
    p.add_argument("--data", help="canonical CSV to train on")
    p.add_argument("--out", required=True, help="output model path")
    if not multi:
        p.add_argument("--classes", type=int, default=29, choices=(8, 28, 29))
        p.add_argument("--synthetic", action="store_true",
                       help="train on the built-in synthetic glyph set")
        p.add_argument("--per-class", type=int, default=200,
                       help="synthetic samples per class")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--epochs", type=int, default=None,
                   help="default 30, or 3 with --quick")
    p.add_argument("--batch", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--quick", action="store_true",
                   help="desk-scale network (filters 8/16/24/32) and 3 epochs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qalam",
        description="Handwritten Arabic character recognition with "
                    "stroke-count model routing.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="normalize a raw CSV into canonical form")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--transpose", action="store_true",
                   help="transpose each image (orientation fix)")
    p.add_argument("--invert", action="store_true", help="map pixels p -> 255-p")
    p.add_argument("--header", action="store_true", help="skip the first row")
    p.add_argument("--classes", type=int, default=29, choices=(8, 28, 29))
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("merge", help="concatenate two canonical CSVs into the 29-class map")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--classes-a", type=int, default=29, choices=(28, 29))
    p.add_argument("--classes-b", type=int, default=28, choices=(28, 29))
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("train", help="k-fold training of a single network")
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("train-multi", help="train one network per stroke group")
    _add_train_flags(p, multi=True)
    p.set_defaults(func=cmd_train_multi)

    p = sub.add_parser("eval", help="classification report for a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--report", help="write the plain-text report here")
    p.add_argument("--csv", help="write the machine-readable report here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("eval-multi", help="per-group reports plus averaged accuracy")
    p.add_argument("--model", required=True, help="multi-model bundle path")
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_eval_multi)

    p = sub.add_parser("predict", help="classify one image (1024 pixel values)")
    p.add_argument("--image", required=True)
    p.add_argument("--model", help="single-model path")
    p.add_argument("--multi", help="multi-model bundle path")
    p.add_argument("--strokes", type=int, help="live stroke count (multi routing)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("groups", help="print the stroke group table")
    p.set_defaults(func=cmd_groups)

    p = sub.add_parser("serve", help="run the HTTP inference service")
    p.add_argument("--model", help="single-model path")
    p.add_argument("--multi", help="multi-model bundle path")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "predict" and not (bool(args.model) ^ bool(args.multi)):
        print("error: pass exactly one of --model or --multi", file=sys.stderr)
        return 2
    if args.command == "train" and not (args.data or args.synthetic):
        print("error: pass --data or --synthetic", file=sys.stderr)
        return 2
    if args.command == "train-multi" and not args.data:
        print("error: --data is required", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (qdata.CsvFormatError, qdata.DatasetError, model.ConfigError,
            model.SerializationError, model.TrainingDiverged,
            strokes.RoutingError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
