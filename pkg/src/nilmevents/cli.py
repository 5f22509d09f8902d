"""Command-line surface binding the pipeline end to end.

Option precedence: explicit flags override config-file values override
defaults; the full effective configuration is echoed into every output
artifact so any run can be reproduced from its own outputs.

Exit codes: 0 success, 2 usage error, 3 data error, 4 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

from nilmevents import evaluate
from nilmevents.classify import grid_search, load_model, save_model
from nilmevents.config import PipelineConfig
from nilmevents.detector import DetectorConfig, detect, detections_to_csv
from nilmevents.errors import DataError
from nilmevents.io import (
    SynthSpec,
    load_ground_truth,
    load_recording,
    store_ground_truth,
    store_recording,
    synth_recording,
)
from nilmevents.training import adaptive_train, build_training_set

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_RUNTIME = 4


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise DataError(f"config file not found: {p}")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"config file {p}: {exc}") from exc
    if not isinstance(data, dict):
        raise DataError(f"config file {p} must hold a JSON object")
    return data


def _merged(args: argparse.Namespace, file_cfg: dict, key: str, default):
    value = getattr(args, key, None)
    if value is not None:
        return value
    return file_cfg.get(key, default)


def _out_dir(args: argparse.Namespace, file_cfg: dict) -> Path:
    out = Path(_merged(args, file_cfg, "out", "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _dataset_paths(prefix: str) -> tuple[Path, Path, Path]:
    base = Path(prefix)
    return (
        base.with_name(base.name + ".f32"),
        base.with_name(base.name + ".manifest.json"),
        base.with_name(base.name + ".gt.csv"),
    )


def _pipeline_config(args: argparse.Namespace, file_cfg: dict) -> PipelineConfig:
    detector = DetectorConfig(
        step_periods=int(_merged(args, file_cfg, "step_periods", 30)),
        window_s=float(_merged(args, file_cfg, "window_s", 10.0)),
        merge_gap_s=float(_merged(args, file_cfg, "merge_gap_s", 5.0)),
        match_tol_s=float(_merged(args, file_cfg, "match_tol_s", 1.0)),
        non_event_min_dist_s=float(_merged(args, file_cfg, "non_event_min_dist_s", 10.0)),
        rng_seed=int(_merged(args, file_cfg, "seed", 0)),
    )
    return PipelineConfig(
        feature=_merged(args, file_cfg, "feature", "cusum"),
        norm=_merged(args, file_cfg, "norm", "variance"),
        classifier=_merged(args, file_cfg, "clf", "knn"),
        knn_k=int(_merged(args, file_cfg, "k", 87)),
        svm_c=float(_merged(args, file_cfg, "c", 1.0)),
        svm_gamma=float(_merged(args, file_cfg, "gamma", 1.0)),
        adaptive_rounds=int(_merged(args, file_cfg, "adaptive", 0)),
        n_non_events=int(_merged(args, file_cfg, "non_events", 300)),
        folds=int(_merged(args, file_cfg, "folds", 5)),
        jobs=int(_merged(args, file_cfg, "jobs", 1)),
        detector=detector,
    )


def cmd_synth(args: argparse.Namespace) -> int:
    file_cfg = _load_config_file(args.config)
    out = _out_dir(args, file_cfg)
    spec = SynthSpec(
        duration_s=float(_merged(args, file_cfg, "duration", 3600.0)),
        n_true_events=int(_merged(args, file_cfg, "events", 50)),
        n_nuisance_transients=int(_merged(args, file_cfg, "nuisance", 150)),
        base_load_w=float(_merged(args, file_cfg, "base_load", 200.0)),
        event_step_min_w=float(_merged(args, file_cfg, "step_min", 30.0)),
        event_step_max_w=float(_merged(args, file_cfg, "step_max", 75.0)),
        event_hold_min_s=float(_merged(args, file_cfg, "hold_min", 5.0)),
        noise_std=float(_merged(args, file_cfg, "noise_std", 2.0)),
        seed=int(_merged(args, file_cfg, "seed", 0)),
        fs=int(_merged(args, file_cfg, "fs", 1000)),
        F0=int(_merged(args, file_cfg, "f0", 50)),
    )
    if spec.n_true_events < 0:
        raise DataError("--events must be >= 0")
    name = _merged(args, file_cfg, "name", "synth")
    rec, gt = synth_recording(spec)
    payload, manifest, gt_path = _dataset_paths(str(out / name))
    store_recording(rec, payload, manifest)
    store_ground_truth(gt, gt_path)
    echo = {"command": "synth", "name": name, "out": str(out), "spec": spec.__dict__}
    _write_json(out / f"{name}.synth-config.json", echo)
    print(f"wrote {payload}, {manifest}, {gt_path}")
    return EXIT_OK


def _load_dataset(prefix: str):
    payload, manifest, gt_path = _dataset_paths(prefix)
    rec = load_recording(payload, manifest)
    gt = load_ground_truth(gt_path) if gt_path.exists() else None
    return rec, gt


def cmd_train(args: argparse.Namespace) -> int:
    file_cfg = _load_config_file(args.config)
    out = _out_dir(args, file_cfg)
    cfg = _pipeline_config(args, file_cfg)
    data = _merged(args, file_cfg, "data", None)
    if data is None:
        raise DataError("train needs --data PREFIX")
    rec, gt = _load_dataset(data)
    if gt is None:
        raise DataError(f"no ground truth found for {data}")

    if cfg.classifier == "svm" and _merged(args, file_cfg, "grid", False):
        base = build_training_set(rec, gt, cfg.n_non_events, cfg)
        from nilmevents.training import train_model  # reuse normalization path
        from nilmevents import normalize as _norm
        matrix = base.matrix()
        params = _norm.fit(matrix, cfg.norm)
        normalized = params.transform(matrix)
        samples = [replace(s, vector=normalized[i]) for i, s in enumerate(base.samples)]
        c, gamma, cv_score = grid_search(samples, folds=min(cfg.folds, 5), jobs=cfg.jobs)
        cfg = replace(cfg, svm_c=c, svm_gamma=gamma)
        print(f"grid search: C={c} gamma={gamma} cv_fscore={cv_score:.3f}")

    base = build_training_set(rec, gt, cfg.n_non_events, cfg)
    model, final_set, stats = adaptive_train(
        rec, gt, base, cfg.adaptive_rounds, cfg, jobs=cfg.jobs
    )
    model_path = out / "model.npz"
    save_model(model, model_path)
    stats_path = out / "train-stats.csv"
    with open(stats_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["round", "train_tp", "train_fp", "set_size_event", "set_size_nonevent"])
        for row in stats:
            writer.writerow([
                row["round"],
                "" if row["train_tp"] is None else row["train_tp"],
                "" if row["train_fp"] is None else row["train_fp"],
                row["set_size_event"], row["set_size_nonevent"],
            ])
    echo = {"command": "train", "data": data, "out": str(out), "config": cfg.to_dict()}
    _write_json(out / "train-config.json", echo)
    print(f"wrote {model_path} ({model.variant}, feature={model.feature_kind.value}) and {stats_path}")
    return EXIT_OK


def cmd_detect(args: argparse.Namespace) -> int:
    file_cfg = _load_config_file(args.config)
    out = _out_dir(args, file_cfg)
    cfg = _pipeline_config(args, file_cfg)
    data = _merged(args, file_cfg, "data", None)
    model_path = _merged(args, file_cfg, "model", None)
    if data is None or model_path is None:
        raise DataError("detect needs --data PREFIX and --model PATH")
    rec, _ = _load_dataset(data)
    model = load_model(model_path)
    detections = detect(rec, model, cfg.detector, jobs=cfg.jobs)
    det_path = out / "detections.csv"
    detections_to_csv(detections, det_path)
    echo = {"command": "detect", "data": data, "model": str(model_path),
            "out": str(out), "config": cfg.to_dict()}
    _write_json(out / "detect-config.json", echo)
    print(f"wrote {det_path} ({len(detections)} detections)")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    from nilmevents.detector import detections_from_csv

    file_cfg = _load_config_file(args.config)
    out = _out_dir(args, file_cfg)
    det_path = _merged(args, file_cfg, "detections", None)
    gt_path = _merged(args, file_cfg, "gt", None)
    if det_path is None or gt_path is None:
        raise DataError("eval needs --detections CSV and --gt CSV")
    tol = float(_merged(args, file_cfg, "match_tol_s", 1.0))
    detections = detections_from_csv(det_path)
    gt = load_ground_truth(gt_path)
    result = evaluate.match_detections(detections, gt, tol)
    s = evaluate.score(result)
    echo = {"command": "eval", "detections": str(det_path), "gt": str(gt_path),
            "match_tol_s": tol, "out": str(out)}
    report = {
        "precision": s.precision, "recall": s.recall, "fscore": s.fscore,
        "tp": result.tp, "fp": result.fp, "fn": result.fn, "config": echo,
    }
    _write_json(out / "eval-report.json", report)
    with open(out / "eval-summary.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["tp", "fp", "fn", "precision", "recall", "fscore"])
        writer.writerow([result.tp, result.fp, result.fn,
                         repr(s.precision), repr(s.recall), repr(s.fscore)])
    print(f"tp={result.tp} fp={result.fp} fn={result.fn} "
          f"P={s.precision:.3f} R={s.recall:.3f} F={s.fscore:.3f}")
    return EXIT_OK


def cmd_xval(args: argparse.Namespace) -> int:
    file_cfg = _load_config_file(args.config)
    out = _out_dir(args, file_cfg)
    cfg = _pipeline_config(args, file_cfg)
    data = _merged(args, file_cfg, "data", None)
    if data is None:
        raise DataError("xval needs --data PREFIX")
    rec, gt = _load_dataset(data)
    if gt is None:
        raise DataError(f"no ground truth found for {data}")
    report = evaluate.cross_validate(rec, gt, cfg)
    payload = report.to_dict()
    payload["config"] = {"command": "xval", "data": data, "out": str(out), **payload["config"]}
    _write_json(out / "xval-report.json", payload)
    with open(out / "xval-summary.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["fold", "tp", "fp", "fn", "n_labels"])
        for f in report.folds:
            writer.writerow([f["fold"], f["tp"], f["fp"], f["fn"], f["n_labels"]])
        writer.writerow(["pooled", report.tp, report.fp, report.fn,
                         sum(f["n_labels"] for f in report.folds)])
    print(f"pooled: tp={report.tp} fp={report.fp} fn={report.fn} "
          f"P={report.precision:.3f} R={report.recall:.3f} F={report.fscore:.3f}")
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from nilmevents.service import create_app

    file_cfg = _load_config_file(args.config)
    data_dir = _merged(args, file_cfg, "data", None)
    if data_dir is None:
        raise DataError("serve needs --data DIR")
    store = _merged(args, file_cfg, "store", str(Path(data_dir) / "annotations.jsonl"))
    host = _merged(args, file_cfg, "host", "127.0.0.1")
    port = int(_merged(args, file_cfg, "port", 8765))
    app = create_app(data_dir, store)
    uvicorn.run(app, host=host, port=port, log_level="warning")
    return EXIT_OK


def cmd_export_annotations(args: argparse.Namespace) -> int:
    from nilmevents.service import AnnotationStore

    file_cfg = _load_config_file(args.config)
    store_path = _merged(args, file_cfg, "store", None)
    if store_path is None:
        raise DataError("export-annotations needs --store PATH")
    if not Path(store_path).exists():
        raise DataError(f"annotation store not found: {store_path}")
    out_file = Path(_merged(args, file_cfg, "out", "annotations.gt.csv"))
    store = AnnotationStore(store_path)
    store_ground_truth(store.to_ground_truth(), out_file)
    print(f"wrote {out_file}")
    return EXIT_OK


def _nonneg_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nilmevents",
        description="Supervised appliance event detection toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--out", help="output directory (default: out)")

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset")
    add_common(p_synth)
    p_synth.add_argument("--duration", type=float, help="recording length in seconds")
    p_synth.add_argument("--events", type=_nonneg_int, help="number of true events")
    p_synth.add_argument("--nuisance", type=_nonneg_int, help="number of nuisance transients")
    p_synth.add_argument("--base-load", dest="base_load", type=float)
    p_synth.add_argument("--step-min", dest="step_min", type=float)
    p_synth.add_argument("--step-max", dest="step_max", type=float)
    p_synth.add_argument("--noise-std", dest="noise_std", type=float)
    p_synth.add_argument("--seed", type=int)
    p_synth.add_argument("--fs", type=int)
    p_synth.add_argument("--f0", type=int)
    p_synth.add_argument("--name", help="dataset file prefix (default: synth)")
    p_synth.set_defaults(func=cmd_synth)

    def add_pipeline_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--feature", choices=[
            "current", "delta-current", "admittance", "spf", "cusum", "delta-cusum"])
        p.add_argument("--norm", choices=["none", "minmax", "variance"])
        p.add_argument("--clf", choices=["knn", "svm"])
        p.add_argument("--k", type=int, help="KNN neighbor count")
        p.add_argument("--c", type=float, help="SVM C")
        p.add_argument("--gamma", type=float, help="SVM RBF gamma")
        p.add_argument("--adaptive", type=int, help="adaptive training rounds (0 = classical)")
        p.add_argument("--non-events", dest="non_events", type=int)
        p.add_argument("--step-periods", dest="step_periods", type=int)
        p.add_argument("--merge-gap", dest="merge_gap_s", type=float)
        p.add_argument("--match-tol", dest="match_tol_s", type=float)
        p.add_argument("--seed", type=int)
        p.add_argument("--jobs", type=int)
        p.add_argument("--folds", type=int)

    p_train = sub.add_parser("train", help="train a detector model")
    add_common(p_train)
    add_pipeline_flags(p_train)
    p_train.add_argument("--data", help="dataset path prefix")
    p_train.add_argument("--grid", action="store_const", const=True,
                         help="SVM hyper-parameter grid search before training")
    p_train.set_defaults(func=cmd_train)

    p_detect = sub.add_parser("detect", help="run a model over a recording")
    add_common(p_detect)
    add_pipeline_flags(p_detect)
    p_detect.add_argument("--data", help="dataset path prefix")
    p_detect.add_argument("--model", help="trained model file")
    p_detect.set_defaults(func=cmd_detect)

    p_eval = sub.add_parser("eval", help="score detections against ground truth")
    add_common(p_eval)
    p_eval.add_argument("--detections", help="detections CSV")
    p_eval.add_argument("--gt", help="ground-truth CSV")
    p_eval.add_argument("--match-tol", dest="match_tol_s", type=float)
    p_eval.set_defaults(func=cmd_eval)

    p_xval = sub.add_parser("xval", help="stratified k-fold cross-validation")
    add_common(p_xval)
    add_pipeline_flags(p_xval)
    p_xval.add_argument("--data", help="dataset path prefix")
    p_xval.set_defaults(func=cmd_xval)

    p_serve = sub.add_parser("serve", help="run the annotation service")
    add_common(p_serve)
    p_serve.add_argument("--data", help="dataset directory")
    p_serve.add_argument("--store", help="annotation log path")
    p_serve.add_argument("--host")
    p_serve.add_argument("--port", type=int)
    p_serve.set_defaults(func=cmd_serve)

    p_export = sub.add_parser("export-annotations", help="annotation log -> ground-truth CSV")
    p_export.add_argument("--config", help="JSON config file")
    p_export.add_argument("--store", help="annotation log path")
    p_export.add_argument("--out", help="output CSV path")
    p_export.set_defaults(func=cmd_export_annotations)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except KeyboardInterrupt:
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - runtime failures map to a distinct code
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
