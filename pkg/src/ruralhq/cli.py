"""Single entry point for the batch pipeline.

Subcommands: synth, ingest, serve, train, predict, evaluate, aggregate,
gini, correlate, report. Exit codes: 0 success, 1 usage error, 2 data
error, 3 numerical failure. With a fixed ``--seed``, every command writes
byte-identical artifacts.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from typing import Sequence

import numpy as np

from . import evaluation, geostat, synth, training
from .corpus import (
    BALLOTS_FILENAME,
    IMAGES_FILENAME,
    Corpus,
    ScoreDistribution,
    load_corpus,
    read_ballots_jsonl,
    read_images_jsonl,
    write_ballots_jsonl,
    write_images_jsonl,
)
from .errors import DataError, NumericalError, RuralHQError
from .nn import build_network, desk_spec, load_checkpoint, save_checkpoint
from .training import TrainConfig, predict_corpus, train

LATENTS_FILENAME = "latents.csv"
INDICATORS_FILENAME = "indicators.csv"
CLASSES_FILENAME = "region_classes.csv"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit code 1 instead of argparse's default 2
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="ruralhq", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n", type=int, default=200, help="number of images")
    p.add_argument("--raters", type=int, default=15, help="ballots per image")
    p.add_argument("--side", type=int, default=64, help="raster side in pixels")
    p.add_argument("--out", required=True, help="output data directory")
    p.add_argument("--counties", type=int, default=25)
    p.add_argument("--townships", type=int, default=2)
    p.add_argument("--villages", type=int, default=1)
    p.add_argument("--noise-std", type=float, default=synth.BALLOT_NOISE_STD)

    p = sub.add_parser("ingest", help="validate images.jsonl and ballots.jsonl")
    p.add_argument("--images", required=True)
    p.add_argument("--ballots")
    p.add_argument("--out", help="re-export a validated snapshot to this directory")

    p = sub.add_parser("serve", help="run the scoring HTTP service")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--addr", default="127.0.0.1:8000")
    p.add_argument("--checkpoint")

    p = sub.add_parser("train", help="train the quality model on a data directory")
    p.add_argument("--data", required=True)
    p.add_argument("--out", help="checkpoint path (default <data>/model.ckpt)")
    p.add_argument("--history", help="history CSV path (default <data>/history.csv)")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float, help="initial learning rate")
    p.add_argument("--momentum", type=float)
    p.add_argument("--decay", type=float, help="plateau decay factor")
    p.add_argument("--patience", type=int)
    p.add_argument("--split", help="train,val,test ratios e.g. 0.8,0.1,0.1")
    p.add_argument("--seed", type=int)
    p.add_argument("--side", type=int, default=64, help="network input side")
    p.add_argument("--min-raters", type=int, default=15)

    p = sub.add_parser("predict", help="predict distributions for corpus images")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True, help="predictions CSV path")
    p.add_argument("--ids", help="comma-separated image ids (default: qualified images)")
    p.add_argument("--min-raters", type=int, default=15)

    p = sub.add_parser("evaluate", help="compare predictions to crowd tallies")
    p.add_argument("--data", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--out-json", help="eval.json path")
    p.add_argument("--out-csv", help="eval.csv path")
    p.add_argument("--groups", action="store_true", help="include attribute group tables")

    p = sub.add_parser("aggregate", help="aggregate quality to a region level")
    p.add_argument("--data", required=True)
    p.add_argument("--level", choices=geostat.LEVELS, default="county")
    p.add_argument("--min-images", type=int)
    p.add_argument("--predictions", help="use predicted means instead of tallies")
    p.add_argument("--out", required=True)

    p = sub.add_parser("gini", help="Gini coefficient of a value list")
    p.add_argument("--values", required=True, help="comma-separated non-negative values")

    p = sub.add_parser("correlate", help="county quality vs indicator columns")
    p.add_argument("--data", required=True)
    p.add_argument("--indicators", help="default <data>/indicators.csv")
    p.add_argument("--predictions")
    p.add_argument("--out", help="optional correlations CSV path")

    p = sub.add_parser("report", help="predict + evaluate + aggregate + inequality + gaps")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True, help="report directory")
    p.add_argument("--indicators", help="default <data>/indicators.csv")
    p.add_argument("--classes", help="default <data>/region_classes.csv")
    p.add_argument("--min-raters", type=int, default=15)
    return parser


# --- helpers -------------------------------------------------------------------


def _tally_means(corpus: Corpus) -> dict[str, float]:
    return {i: corpus.distribution_of(i).mean for i in corpus.tallied_images()}


def write_predictions_csv(path, preds: dict[str, ScoreDistribution]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["image_id"] + [f"p{j}" for j in range(1, 11)] + ["mean", "std"])
        for image_id in sorted(preds):
            d = preds[image_id]
            writer.writerow([image_id] + [repr(v) for v in d.p] + [repr(d.mean), repr(d.std)])


def read_predictions_csv(path) -> dict[str, ScoreDistribution]:
    out: dict[str, ScoreDistribution] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            p = [float(row[f"p{j}"]) for j in range(1, 11)]
            out[row["image_id"]] = ScoreDistribution.from_probabilities(p, n_ballots=0)
    return out


def _county_quality_and_area(
    corpus: Corpus, means: dict[str, float], indicators_path: str | None
) -> tuple[list[float], list[float]]:
    """Per-county (area, quality) pairs for the weighted-inequality report.

    Area comes from indicators.csv when available, otherwise from the
    images' own area_per_capita attribute averaged per county.
    """
    aggs = geostat.aggregate_regions(
        [corpus.image(i) for i in sorted(means)], means, "county"
    )
    quality = {a.county_code: a.mean_quality for a in aggs if a.county_code}
    area: dict[str, float] = {}
    if indicators_path and os.path.exists(indicators_path):
        for row in geostat.read_indicators_csv(indicators_path):
            if row.area_per_capita is not None:
                area[row.county_code] = row.area_per_capita
    else:
        sums: dict[str, list[float]] = {}
        for record in corpus.images():
            if record.area_per_capita is not None and record.geo.county_code:
                sums.setdefault(record.geo.county_code, []).append(record.area_per_capita)
        area = {code: float(np.mean(v)) for code, v in sums.items()}
    codes = sorted(set(quality) & set(area))
    return [area[c] for c in codes], [quality[c] for c in codes]


# --- command implementations -----------------------------------------------------


def _cmd_synth(args) -> int:
    result = synth.generate_synthetic_corpus(
        seed=args.seed,
        n_images=args.n,
        raters_per_image=args.raters,
        side=args.side,
        out_dir=args.out,
        n_counties=args.counties,
        townships_per_county=args.townships,
        villages_per_township=args.villages,
        noise_std=args.noise_std,
    )
    write_images_jsonl(os.path.join(args.out, IMAGES_FILENAME), result.images)
    write_ballots_jsonl(os.path.join(args.out, BALLOTS_FILENAME), result.ballots)
    with open(os.path.join(args.out, LATENTS_FILENAME), "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["image_id", "latent_quality"])
        for image_id in sorted(result.latents):
            writer.writerow([image_id, repr(result.latents[image_id])])

    county_q: dict[str, list[float]] = {}
    county_area: dict[str, list[float]] = {}
    for record in result.images:
        code = record.geo.county_code
        county_q.setdefault(code, []).append(result.latents[record.image_id])
        if record.area_per_capita is not None:
            county_area.setdefault(code, []).append(record.area_per_capita)
    quality = {c: float(np.mean(v)) for c, v in county_q.items()}
    area = {c: float(np.mean(v)) for c, v in county_area.items()}
    geostat.write_indicators_csv(
        os.path.join(args.out, INDICATORS_FILENAME),
        synth.synthetic_indicators(quality, area, seed=args.seed),
    )
    classes = synth.synthetic_region_classes(sorted(quality))
    with open(os.path.join(args.out, CLASSES_FILENAME), "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["county_code", "ns_class", "ew_class"], lineterminator="\n")
        writer.writeheader()
        writer.writerows(classes)
    print(
        f"wrote {len(result.images)} images, {len(result.ballots)} ballots, "
        f"{len(quality)} counties to {args.out}"
    )
    return 0


def _cmd_ingest(args) -> int:
    corpus = Corpus(root=os.path.dirname(os.path.abspath(args.images)))
    corpus.ingest_images(read_images_jsonl(args.images))
    n_ballots = 0
    if args.ballots:
        for ballot in read_ballots_jsonl(args.ballots):
            corpus.submit_ballot(ballot)
            n_ballots += 1
    if args.out:
        corpus.export_snapshot(args.out)
    print(f"ingested {len(corpus)} images, {n_ballots} ballots; "
          f"{len(corpus.qualified_images())} qualified")
    return 0


def _cmd_serve(args) -> int:
    from .service import serve

    serve(args.data_dir, addr=args.addr, checkpoint_path=args.checkpoint)
    return 0


def _train_config(args) -> TrainConfig:
    overrides = {}
    for attr, key in (
        ("epochs", "epochs"),
        ("batch_size", "batch_size"),
        ("lr", "lr0"),
        ("momentum", "momentum"),
        ("decay", "lr_decay_factor"),
        ("patience", "plateau_patience"),
        ("seed", "seed"),
    ):
        value = getattr(args, attr)
        if value is not None:
            overrides[key] = value
    if args.split:
        try:
            overrides["split"] = tuple(float(v) for v in args.split.split(","))
        except ValueError as exc:
            raise UsageError(f"--split expects three comma-separated ratios: {exc}") from exc
    if args.config:
        return TrainConfig.from_kv_file(args.config, **overrides)
    config = TrainConfig(**overrides)
    config.validate()
    return config


def _cmd_train(args) -> int:
    config = _train_config(args)
    if os.path.exists(os.path.join(args.data, IMAGES_FILENAME)):
        corpus = load_corpus(args.data)
    else:
        corpus = Corpus(root=args.data)  # empty data dir: train reports EmptySplit
    spec = desk_spec(input_side=args.side)
    params, history = train(corpus, config, spec, min_raters=args.min_raters)
    out = args.out or os.path.join(args.data, "model.ckpt")
    save_checkpoint(params, spec, out)
    history_path = args.history or os.path.join(args.data, "history.csv")
    history.write_csv(history_path)
    if len(history):
        last = history.epochs[-1]
        best = min(r.val_loss for r in history)
        print(
            f"trained {len(history)} epochs; final train {last.train_loss:.6f}, "
            f"best val {best:.6f}; checkpoint {out}"
        )
    else:
        print(f"epochs=0: wrote initialized checkpoint {out}")
    return 0


def _cmd_predict(args) -> int:
    corpus = load_corpus(args.data)
    _, params = load_checkpoint(args.checkpoint)
    if args.ids:
        ids = args.ids.split(",")
    else:
        ids = corpus.qualified_images(min_raters=args.min_raters) or corpus.image_ids()
    preds = predict_corpus(params, ids, corpus)
    write_predictions_csv(args.out, preds)
    print(f"predicted {len(preds)} images -> {args.out}")
    return 0


def _cmd_evaluate(args) -> int:
    corpus = load_corpus(args.data, check_rasters=False)
    preds = read_predictions_csv(args.predictions)
    truth = {i: corpus.distribution_of(i) for i in preds}
    report = evaluation.eval_metrics(preds, truth)
    groups = []
    if args.groups:
        means = {i: d.mean for i, d in preds.items()}
        images = [corpus.image(i) for i in sorted(preds)]
        for attribute in ("floors", "has_ac", "facade"):
            try:
                groups.append(evaluation.attribute_group_report(images, means, attribute))
            except RuralHQError:
                pass  # attribute absent or degenerate in this corpus
    if args.out_json:
        evaluation.write_eval_json(args.out_json, report, groups)
    if args.out_csv:
        evaluation.write_eval_csv(args.out_csv, report, groups)
    print(
        f"n={report.n} r_squared={report.r_squared:.4f} "
        f"mse_avg={report.mse_avg:.4f} mse_std={report.mse_std:.4f}"
    )
    return 0


def _cmd_aggregate(args) -> int:
    corpus = load_corpus(args.data, check_rasters=False)
    if args.predictions:
        means = {i: d.mean for i, d in read_predictions_csv(args.predictions).items()}
    else:
        means = _tally_means(corpus)
    images = [corpus.image(i) for i in sorted(means)]
    aggs = geostat.aggregate_regions(images, means, args.level, min_images=args.min_images)
    geostat.write_aggregates_csv(args.out, aggs)
    included = sum(1 for a in aggs if a.included)
    print(f"{len(aggs)} {args.level} regions ({included} included) -> {args.out}")
    return 0


def _cmd_gini(args) -> int:
    values = [float(v) for v in args.values.split(",") if v.strip()]
    print(np.format_float_positional(geostat.gini(values), trim="-"))
    return 0


def _cmd_correlate(args) -> int:
    corpus = load_corpus(args.data, check_rasters=False)
    if args.predictions:
        means = {i: d.mean for i, d in read_predictions_csv(args.predictions).items()}
    else:
        means = _tally_means(corpus)
    images = [corpus.image(i) for i in sorted(means)]
    aggs = geostat.aggregate_regions(images, means, "county")
    indicators_path = args.indicators or os.path.join(args.data, INDICATORS_FILENAME)
    rows = geostat.read_indicators_csv(indicators_path)
    results = geostat.indicator_correlations(aggs, rows)
    for result in results:
        print(f"{result.indicator}: r={result.r:.4f} (n={result.n_joined})")
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["indicator", "r", "n_joined"])
            for result in results:
                writer.writerow([result.indicator, repr(result.r), result.n_joined])
    return 0


def _cmd_report(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    corpus = load_corpus(args.data)
    _, params = load_checkpoint(args.checkpoint)
    ids = corpus.qualified_images(min_raters=args.min_raters) or corpus.image_ids()

    preds = predict_corpus(params, ids, corpus)
    write_predictions_csv(os.path.join(args.out, "predictions.csv"), preds)

    tallied = [i for i in ids if corpus.ballot_count(i) > 0]
    truth = {i: corpus.distribution_of(i) for i in tallied}
    report = evaluation.eval_metrics({i: preds[i] for i in tallied}, truth)
    means = {i: preds[i].mean for i in preds}
    images = [corpus.image(i) for i in sorted(preds)]
    groups = []
    for attribute in ("floors", "has_ac", "facade"):
        try:
            groups.append(evaluation.attribute_group_report(images, means, attribute))
        except RuralHQError:
            pass
    evaluation.write_eval_json(os.path.join(args.out, "eval.json"), report, groups)

    aggs = geostat.aggregate_regions(images, means, "county")
    geostat.write_aggregates_csv(os.path.join(args.out, "aggregates.csv"), aggs)

    indicators_path = args.indicators or os.path.join(args.data, INDICATORS_FILENAME)
    area, quality = _county_quality_and_area(corpus, means, indicators_path)
    inequality = geostat.weighted_inequality_report(area, quality)
    geostat.write_inequality_json(os.path.join(args.out, "inequality.json"), inequality)

    classes_path = args.classes or os.path.join(args.data, CLASSES_FILENAME)
    classes = geostat.read_region_classes_csv(classes_path)
    gaps = geostat.directional_gap_report(aggs, classes)
    geostat.write_gaps_csv(os.path.join(args.out, "gaps.csv"), gaps)

    print(
        f"report in {args.out}: n={report.n} r_squared={report.r_squared:.4f} "
        f"gini {inequality.gini_area:.4f} -> {inequality.gini_weighted:.4f}"
    )
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "ingest": _cmd_ingest,
    "serve": _cmd_serve,
    "train": _cmd_train,
    "predict": _cmd_predict,
    "evaluate": _cmd_evaluate,
    "aggregate": _cmd_aggregate,
    "gini": _cmd_gini,
    "correlate": _cmd_correlate,
    "report": _cmd_report,
}


def run(argv: Sequence[str]) -> int:
    """Dispatch one command; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 3
    except (DataError, RuralHQError, OSError, ValueError) as exc:
        print(f"data error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
