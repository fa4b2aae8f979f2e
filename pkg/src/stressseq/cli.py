"""Command-line interface.

Subcommands cover the full pipeline: feature extraction, segmentation,
augmentation inspection, autoencoder pretraining, active selection,
training, evaluation, threshold sweeps, saliency maps, and the synthetic
benchmark. All outputs are byte-deterministic for a fixed config and seed.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from stressseq import config as configmod
from stressseq.augment import AugmentationSpec, OPERATORS, apply_ops, augment_batch
from stressseq.autoencoder import transplant
from stressseq.core.ops import binarize, make_splits, segment
from stressseq.core.store import (
    iso_utc,
    load_dataset,
    read_label_csv,
    read_stream_csv,
    save_dataset,
)
from stressseq.core.rng import derived_rng
from stressseq.core.types import BinarizationRule, Dataset, SequenceWindow, Split
from stressseq.evaluation import paired_tests, random_baseline
from stressseq.experiments import (
    evaluate_checkpoint,
    pretrain_for_fold,
    run_ablation,
    summarize_sweep,
    sweep_active_sampling,
    train_method,
)
from stressseq.features.phone import read_app_map
from stressseq.features.registry import (
    FEATURE_GROUPS,
    RawInputs,
    extract_stream,
    read_phone_csv,
    read_rr_csv,
    read_sc_csv,
)
from stressseq.nn.checkpoint import load_checkpoint, save_checkpoint
from stressseq.sampling import fit_gmm, select_k, select_unlabeled
from stressseq.saliency import average_saliency, effective_horizon
from stressseq.synth import SynthSpec, generate
from stressseq.training import METHODS, predict


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return value


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        out = _writer(fh)
        out.writerow(header)
        for row in rows:
            out.writerow([_fmt(v) for v in row])


def _parse_rule(text: str) -> BinarizationRule:
    if text == "zscore":
        return BinarizationRule(kind="per_participant_zscore")
    if text.startswith("threshold:"):
        return BinarizationRule(kind="threshold", threshold=int(text.split(":", 1)[1]))
    raise argparse.ArgumentTypeError(
        f"rule must be 'zscore' or 'threshold:<level>', got {text!r}"
    )


def _parse_int_list(text: str):
    return [int(v) for v in text.split(",") if v.strip() != ""]


def _parse_float_list(text: str):
    return [float(v) for v in text.split(",") if v.strip() != ""]


def _parse_k_range(text: str) -> range:
    lo, _, hi = text.partition(":")
    return range(int(lo), int(hi) + 1)


def _load_split_from_meta(meta: dict) -> Split:
    assignments = meta["split_assignments"]
    return Split(fold_count=int(meta["fold_count"]), assignments=assignments)


def cmd_segment(args):
    streams, feature_names = read_stream_csv(args.stream)
    label_times = []
    rule = args.rule
    if args.labels:
        raw = read_label_csv(args.labels)
        labels, _ = binarize([(pid, level) for pid, _, level in raw], rule)
        label_times = [
            (pid, t, label, level)
            for (pid, t, level), label in zip(raw, labels)
        ]
    dataset, report = segment(
        streams,
        length=args.length,
        resolution_minutes=args.resolution,
        label_times=label_times,
        feature_names=feature_names,
        binarization=rule,
    )
    save_dataset(dataset, args.out)
    print(
        f"wrote {report.windows_kept} windows ({report.labeled_kept} labeled) to "
        f"{args.out}; dropped {report.dropped_incomplete} incomplete, "
        f"{report.dropped_label_collisions} label collisions"
    )


def cmd_features(args):
    inputs = RawInputs()
    if args.rr:
        inputs.rr = read_rr_csv(args.rr)
    if args.sc:
        inputs.sc, inputs.sc_sample_rate = read_sc_csv(args.sc)
    if args.phone:
        inputs.phone = read_phone_csv(args.phone)
    if args.app_map:
        inputs.app_categories = read_app_map(args.app_map)
    groups = [g.strip() for g in args.groups.split(",")]
    streams, names = extract_stream(inputs, groups, args.resolution)
    with open(args.out, "w", newline="") as fh:
        out = _writer(fh)
        out.writerow(["participant_id", "timestamp"] + names)
        for pid in sorted(streams):
            for t, row in streams[pid]:
                out.writerow([pid, iso_utc(t)] + [_fmt(v) for v in row])
    total = sum(len(rows) for rows in streams.values())
    print(f"wrote {total} feature rows for {len(streams)} participants to {args.out}")


def cmd_augment(args):
    dataset = load_dataset(args.dataset)
    spec = AugmentationSpec()
    if args.spec:
        raw = json.loads(Path(args.spec).read_text())
        spec = AugmentationSpec.from_dict(raw.get("augmentation", raw))
    augmented = augment_batch(dataset.windows, spec, args.seed)
    flat = [copy for copies in augmented for copy in copies]
    out_dataset = Dataset(
        windows=tuple(flat),
        feature_names=dataset.feature_names,
        step_resolution=dataset.step_resolution,
        binarization=dataset.binarization,
    )
    out_dir = Path(args.out)
    save_dataset(out_dataset, out_dir)

    # Per-operator before/after traces of the first window, for plotting.
    if dataset.windows:
        window = dataset.windows[0].features
        rows = []
        for op in OPERATORS:
            one_op = AugmentationSpec(
                ops=(op,),
                jitter_sigma=spec.jitter_sigma,
                scale_sigma=spec.scale_sigma,
                scale_per=spec.scale_per,
                mw_sigma=spec.mw_sigma,
                mw_knots=spec.mw_knots,
                tw_sigma=spec.tw_sigma,
                tw_knots=spec.tw_knots,
                count=1,
            )
            transformed = apply_ops(window, one_op, derived_rng(args.seed, "examples", op))
            for t in range(window.shape[0]):
                for f, name in enumerate(dataset.feature_names):
                    rows.append([op, t, name, window[t, f], transformed[t, f]])
        _write_rows(
            out_dir / "operator_examples.csv",
            ["operator", "step", "feature", "original", "augmented"],
            rows,
        )
    print(f"wrote {len(flat)} augmented windows to {args.out}")


def cmd_pretrain(args):
    dataset = load_dataset(args.dataset)
    config = configmod.load_experiment_config(args.spec)
    split = make_splits(dataset, config.fold_count, config.split_seed)
    spec = config.train_spec(dataset.n_features)
    outcome = pretrain_for_fold(
        dataset, split, args.fold, spec.network, config.pretrain, args.seed
    )
    save_checkpoint(args.out, outcome.checkpoint)
    _write_rows(
        args.loss_curve,
        ["epoch", "train_mse", "holdout_mse"],
        outcome.curve,
    )
    final = outcome.curve[-1]
    print(
        f"pretrained on {outcome.checkpoint.meta['source_window_count']} windows; "
        f"final train mse {final[1]:.6f}, holdout mse {final[2]:.6f}"
    )


def _read_latents_csv(path):
    ids = []
    values = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)  # header: id, z0..z{H-1}
        for row in reader:
            if not row:
                continue
            ids.append(row[0])
            values.append([float(v) for v in row[1:]])
    return ids, np.asarray(values, dtype=np.float64)


def cmd_select(args):
    _, labeled = _read_latents_csv(args.labeled_latents)
    unlabeled_ids, unlabeled = _read_latents_csv(args.unlabeled_latents)
    chosen_k, table = select_k(labeled, args.k_range, args.seed)
    model = fit_gmm(labeled, chosen_k, args.seed)
    report = select_unlabeled(
        model, unlabeled, args.threshold,
        labeled_latents=labeled, unlabeled_ids=unlabeled_ids,
    )
    rows = [
        ["threshold", report.threshold],
        ["chosen_k", chosen_k],
        ["selected_count", len(report.selected_unlabeled_ids)],
        ["fraction_unlabeled_selected", report.fraction_unlabeled_selected],
        ["fraction_labeled_below_threshold", report.fraction_labeled_below_threshold],
    ]
    for entry in table:
        rows.append([f"k{entry['k']}_aic", entry["aic"]])
        rows.append([f"k{entry['k']}_bic", entry["bic"]])
    rows += [["selected_id", sid] for sid in report.selected_unlabeled_ids]
    _write_rows(args.report, ["key", "value"], rows)
    print(
        f"K={chosen_k}; selected {len(report.selected_unlabeled_ids)} of "
        f"{len(unlabeled_ids)} unlabeled at NLL<={args.threshold}"
    )


def cmd_train(args):
    config = configmod.load_experiment_config(args.config)
    dataset = load_dataset(config.dataset)
    split = make_splits(dataset, config.fold_count, config.split_seed)
    spec = config.train_spec(dataset.n_features)
    if config.pretrained_checkpoint:
        pretrained = load_checkpoint(config.pretrained_checkpoint)
        from stressseq.training import train as train_fn

        result = train_fn(dataset, split, args.fold, spec, pretrained, args.seed)
    else:
        result = train_method(
            dataset, split, args.fold, spec, config.pretrain, args.seed,
            active_threshold=config.active_threshold,
            active_k_range=config.k_range(),
        )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out / "checkpoint.bin", result.checkpoint)
    (out / "scaler.json").write_text(
        json.dumps(result.scaler.to_dict(), sort_keys=True) + "\n"
    )
    _write_rows(
        out / "log.csv",
        ["epoch", "loss_ce", "loss_kl_l", "loss_kl_u", "val_f1"],
        result.log.rows,
    )
    print(
        f"method {spec.method}, fold {args.fold}: best val f1 "
        f"{result.log.best_val_f1:.4f} at epoch {result.log.best_epoch}"
    )


def cmd_evaluate(args):
    checkpoint = load_checkpoint(args.checkpoint)
    dataset = load_dataset(args.dataset)
    split = _load_split_from_meta(checkpoint.meta)
    report = evaluate_checkpoint(checkpoint, dataset, split, args.fold)
    _write_rows(args.report, ["key", "value"], report.rows())
    print(f"fold {args.fold}: f1 {report.f1:.4f} (macro {report.macro_f1:.4f})")


def cmd_sweep(args):
    config = configmod.load_experiment_config(args.config)
    dataset = load_dataset(config.dataset)
    split = make_splits(dataset, config.fold_count, config.split_seed)
    spec = config.train_spec(dataset.n_features)
    points = sweep_active_sampling(
        dataset, split, args.fold, args.thresholds, spec, config.pretrain,
        args.seeds, k_range=config.k_range(),
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_rows(
        out / "sweep_points.csv",
        ["threshold", "arm", "seed", "f1", "frac_labeled", "frac_unlabeled",
         "selected_count", "pretrained"],
        [
            [p.threshold, p.arm, p.seed, p.f1, p.frac_labeled, p.frac_unlabeled,
             p.selected_count, int(p.pretrained)]
            for p in points
        ],
    )
    summary = summarize_sweep(points)
    _write_rows(
        out / "sweep_summary.csv",
        ["threshold", "arm", "f1_mean", "f1_std", "frac_labeled", "frac_unlabeled"],
        [
            [r["threshold"], r["arm"], r["f1_mean"], r["f1_std"], r["frac_labeled"],
             r["frac_unlabeled"]]
            for r in summary
        ],
    )
    # Heatmap-ready matrix: thresholds x seeds per arm.
    for arm in ("active", "random"):
        matrix_rows = []
        for threshold in sorted({p.threshold for p in points}):
            row = [threshold]
            for seed in args.seeds:
                match = [
                    p.f1 for p in points
                    if p.arm == arm and p.threshold == threshold and p.seed == seed
                ]
                row.append(match[0] if match else float("nan"))
            matrix_rows.append(row)
        _write_rows(
            out / f"f1_matrix_{arm}.csv",
            ["threshold"] + [f"seed_{s}" for s in args.seeds],
            matrix_rows,
        )
    active = [r for r in summary if r["arm"] == "active"]
    random_arm = [r for r in summary if r["arm"] == "random"]
    if active and random_arm:
        test = paired_tests(
            [p.f1 for p in sorted(points, key=lambda p: (p.threshold, p.seed)) if p.arm == "active"],
            [p.f1 for p in sorted(points, key=lambda p: (p.threshold, p.seed)) if p.arm == "random"],
            one_sided=True,
        )
        print(f"active vs random: t={test.t_statistic:.3f}, one-sided p={test.p_value:.4f}")
    print(f"wrote sweep outputs to {args.out}")


def cmd_saliency(args):
    checkpoint = load_checkpoint(args.checkpoint)
    dataset = load_dataset(args.dataset)
    windows = list(dataset.labeled_windows())
    if not windows:
        raise SystemExit("dataset has no labeled windows to attribute")
    features = np.stack([w.features for w in windows])
    if args.correct_only:
        probs = predict(checkpoint, features)
        labels = np.array([w.label for w in windows])
        keep = (probs >= 0.5).astype(int) == labels
        if not keep.any():
            raise SystemExit("no correctly classified windows to attribute")
        features = features[keep]
    saliency = average_saliency(
        checkpoint, features,
        feature_names=dataset.feature_names,
        resolution_minutes=dataset.step_resolution,
    )
    horizon = effective_horizon(saliency)
    with open(args.out, "w", newline="") as fh:
        out = _writer(fh)
        out.writerow(["step"] + list(saliency.feature_names))
        for t in range(saliency.values.shape[0]):
            out.writerow([t] + [_fmt(v) for v in saliency.values[t]])
        out.writerow(["horizon_minutes", _fmt(horizon)])
    if args.heatmap:
        _write_rows(
            args.heatmap,
            ["step", "feature", "saliency"],
            [
                [t, name, saliency.values[t, f]]
                for t in range(saliency.values.shape[0])
                for f, name in enumerate(saliency.feature_names)
            ],
        )
    print(
        f"averaged saliency over {saliency.sample_count} windows; "
        f"effective horizon {horizon:.1f} minutes"
    )


def cmd_synth(args):
    spec = SynthSpec.from_dict(json.loads(Path(args.spec).read_text()))
    dataset = generate(spec)
    save_dataset(dataset, args.out)
    print(
        f"generated {len(dataset.windows)} windows "
        f"({len(dataset.labeled_index)} labeled) for {spec.participants} "
        f"participants at {args.out}"
    )


def cmd_bench(args):
    raw = json.loads(Path(args.spec).read_text())
    synth_spec = SynthSpec.from_dict(raw.get("synth", raw))
    config = configmod.experiment_config_from_dict(raw.get("experiment", {}))
    methods = list(METHODS) if args.methods == "all" else [
        m.strip() for m in args.methods.split(",")
    ]
    synth_dim = synth_spec.n_features
    train_specs = {}
    for method in methods:
        config.method = method
        train_specs[method] = config.train_spec(synth_dim)
    rows, summary = run_ablation(
        synth_spec,
        train_specs,
        config.pretrain,
        args.seeds,
        fold_count=config.fold_count,
        folds=tuple(args.folds),
        active_threshold=config.active_threshold,
    )
    _write_rows(
        args.out,
        ["method", "seed", "fold", "f1"],
        [[r.method, r.seed, r.fold, r.f1] for r in rows],
    )
    order = ["random", "baseline", "ae", "da", "da_ae", "da_cr", "da_ae_cr"]
    lines = ["| method | f1 mean | f1 std |", "| --- | --- | --- |"]
    for method in order:
        if method in summary:
            mean, std = summary[method]
            lines.append(f"| {method} | {mean:.4f} | {std:.4f} |")
    summary_path = Path(args.out).with_suffix(".md")
    summary_path.write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    print(f"wrote {args.out} and {summary_path}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stressseq",
        description="Semi-supervised sequence learning pipeline for stress detection",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", help="cut feature streams into windows")
    p.add_argument("--stream", required=True)
    p.add_argument("--labels")
    p.add_argument("--rule", type=_parse_rule, default=BinarizationRule("threshold", 1))
    p.add_argument("--length", type=int, default=30)
    p.add_argument("--resolution", type=float, default=5.0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_segment)

    p = sub.add_parser("features", help="extract per-step features from raw CSVs")
    p.add_argument("--rr")
    p.add_argument("--sc")
    p.add_argument("--phone")
    p.add_argument("--app-map", dest="app_map")
    p.add_argument("--groups", default="hrv_time",
                   help=f"comma list from {sorted(FEATURE_GROUPS)}")
    p.add_argument("--resolution", type=float, default=5.0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_features)

    p = sub.add_parser("augment", help="write augmented copies of a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--spec")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_augment)

    p = sub.add_parser("pretrain", help="autoencoder pretraining on one fold")
    p.add_argument("--dataset", required=True)
    p.add_argument("--spec", required=True)
    p.add_argument("--fold", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--loss-curve", dest="loss_curve", required=True)
    p.set_defaults(fn=cmd_pretrain)

    p = sub.add_parser("select", help="GMM active selection from latent CSVs")
    p.add_argument("--labeled-latents", dest="labeled_latents", required=True)
    p.add_argument("--unlabeled-latents", dest="unlabeled_latents", required=True)
    p.add_argument("--k-range", dest="k_range", type=_parse_k_range, default=range(1, 11))
    p.add_argument("--threshold", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", required=True)
    p.set_defaults(fn=cmd_select)

    p = sub.add_parser("train", help="train one method on one fold")
    p.add_argument("--config", required=True)
    p.add_argument("--fold", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("evaluate", help="score a checkpoint on a validation fold")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--fold", type=int, required=True)
    p.add_argument("--report", required=True)
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("sweep", help="active-vs-random pretraining threshold sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--thresholds", type=_parse_float_list, required=True)
    p.add_argument("--seeds", type=_parse_int_list, required=True)
    p.add_argument("--fold", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("saliency", help="averaged input-attribution map")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--heatmap")
    p.add_argument("--correct-only", dest="correct_only", action="store_true")
    p.set_defaults(fn=cmd_saliency)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("bench", help="method ablation on synthetic data")
    p.add_argument("--spec", required=True)
    p.add_argument("--methods", default="all")
    p.add_argument("--seeds", type=_parse_int_list, required=True)
    p.add_argument("--folds", type=_parse_int_list, default=[0])
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_bench)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args.fn(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
