"""Command-line entry point: ``generate``, ``train``, ``infer``, ``eval``.

Every command is deterministic given its flags and input files. Exit codes:
0 success, 2 usage/config error, 3 data error, 4 numerical abort.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .data import SyntheticSpec, generate_synthetic, load_csv, save_csv, split
from .errors import ConfigError, DataError, NumericalError
from .evaluation import (
    cluster_profiles,
    clustering_accuracy,
    contingency_table,
    nmi,
    profile_to_csv,
    profile_to_text,
)
from .objective import encode
from .training import (
    TrainConfig,
    init_gmm_from_latent,
    infer,
    joined_dataset,
    load_checkpoint,
    pretrain,
    save_checkpoint,
    train,
)

SPLIT_FRACTIONS = (0.7, 0.2, 0.1)


def _guide_cols(raw: str | None) -> list[str]:
    return [c.strip() for c in raw.split(",") if c.strip()] if raw else []


def cmd_generate(args) -> int:
    spec = SyntheticSpec(
        k_true=args.k_true,
        n=args.n,
        d_latent_true=args.d_latent_true,
        d_x=args.d_x,
        d_y=args.d_y,
        cluster_separation=args.cluster_separation,
        distractor_dims=args.distractor_dims,
        distractor_scale=args.distractor_scale,
        y_noise_sd=args.y_noise_sd,
        seed=args.seed,
    )
    dataset = generate_synthetic(spec)
    out = Path(args.out)
    save_csv(dataset, out)
    sidecar = out.with_suffix(out.suffix + ".spec.json")
    with open(sidecar, "w", encoding="utf-8") as fh:
        json.dump(vars(spec) | {"tool_version": __version__}, fh, indent=2, sort_keys=True)
    print(f"wrote {dataset.n} rows to {out} (spec: {sidecar})")
    return 0


def _load_config(args) -> TrainConfig:
    base: dict = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                base = json.load(fh)
        except OSError as err:
            raise ConfigError(f"cannot read config file: {err}") from err
        except json.JSONDecodeError as err:
            raise ConfigError(f"{args.config}: line {err.lineno}, column {err.colno}: {err.msg}") from err
        if not isinstance(base, dict):
            raise ConfigError(f"{args.config}: top level must be an object")
    overrides = {
        "seed": args.seed,
        "mode": args.mode,
        "n_clusters": args.n_clusters,
        "latent_dim": args.latent_dim,
        "epochs_train": args.epochs_train,
        "epochs_pretrain": args.epochs_pretrain,
        "batch_size": args.batch_size,
        "beta_train": args.beta_train,
    }
    base.update({k: v for k, v in overrides.items() if v is not None})
    return TrainConfig.from_dict(base)


def _fingerprint(path: Path) -> dict:
    digest = hashlib.sha256(path.read_bytes()).hexdigest()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, [])
        rows = sum(1 for _ in reader)
    return {"rows": rows, "columns": header, "sha256": digest}


def cmd_train(args) -> int:
    config = _load_config(args)
    data_path = Path(args.data)
    dataset = load_csv(data_path, _guide_cols(args.guide_cols), args.label_col)
    train_ds, val_ds, _ = split(dataset, SPLIT_FRACTIONS, config.seed)
    if config.mode == "unguided_joint":
        train_ds, val_ds = joined_dataset(train_ds), joined_dataset(val_ds)

    run_dir = Path(args.out)
    run_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = run_dir / "manifest.json"
    metrics_path = run_dir / "metrics.log"
    checkpoint_path = run_dir / "checkpoint.final.json"
    manifest = {
        "tool_version": __version__,
        "config": config.to_dict(),
        "data": _fingerprint(data_path) | {"guide_cols": _guide_cols(args.guide_cols),
                                           "label_col": args.label_col},
        "artifacts": {"metrics": metrics_path.name, "checkpoint": checkpoint_path.name},
        "timings_s": None,
    }
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")

    latents_dir = run_dir / "latents"
    if args.save_latents:
        latents_dir.mkdir(exist_ok=True)

    metrics_fh = open(metrics_path, "w", encoding="utf-8")

    def emit(record) -> None:
        metrics_fh.write(json.dumps(record.to_dict()) + "\n")

    timings: dict[str, float] = {}
    try:
        t0 = time.perf_counter()
        encoder, decoder, _ = pretrain(config, train_ds, val_ds, on_epoch=emit)
        timings["pretrain"] = time.perf_counter() - t0

        t1 = time.perf_counter()
        gmm = init_gmm_from_latent(encoder, train_ds, config.n_clusters, config.seed,
                                   config.var_floor)
        timings["gmm_init"] = time.perf_counter() - t1

        def emit_train(record) -> None:
            emit(record)
            if args.save_latents:
                coords = encode(encoder, val_ds.X, config.var_floor).mu
                snap = latents_dir / f"epoch_{record.epoch:04d}.csv"
                with open(snap, "w", newline="", encoding="utf-8") as fh:
                    writer = csv.writer(fh)
                    writer.writerow([f"z{j}" for j in range(coords.shape[1])])
                    writer.writerows([repr(float(v)) for v in row] for row in coords)

        t2 = time.perf_counter()
        checkpoint, _ = train(config, train_ds, val_ds, encoder, decoder, gmm,
                              on_epoch=emit_train)
        timings["train"] = time.perf_counter() - t2
        timings["total"] = time.perf_counter() - t0
    finally:
        metrics_fh.close()

    save_checkpoint(checkpoint, checkpoint_path)
    manifest["timings_s"] = {k: round(v, 3) for k, v in timings.items()}
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    print(f"run complete: {run_dir}")
    return 0


def cmd_infer(args) -> int:
    checkpoint = load_checkpoint(args.checkpoint)
    dataset = load_csv(Path(args.data), _guide_cols(args.guide_cols), args.label_col)
    features = dataset.X
    if checkpoint.config.mode == "unguided_joint":
        features = np.concatenate([dataset.X, dataset.Y], axis=1)
    expected = checkpoint.encoder.in_dim
    if features.shape[1] != expected:
        raise DataError(
            f"feature mismatch: checkpoint expects {expected} columns, "
            f"found {features.shape[1]} ({', '.join(dataset.feature_names)})"
        )
    posterior, assignments, latents = infer(checkpoint, features)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    k = posterior.q.shape[1]
    with open(out_dir / "assignments.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cluster"] + [f"q{c}" for c in range(k)])
        for i in range(len(assignments)):
            writer.writerow([int(assignments[i])] + [repr(float(v)) for v in posterior.q[i]])
    with open(out_dir / "latent.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"z{j}" for j in range(latents.shape[1])])
        writer.writerows([repr(float(v)) for v in row] for row in latents)
    print(f"wrote assignments and latent coordinates for {len(assignments)} rows to {out_dir}")
    return 0


def _read_assignments(path: Path) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, [])
        if "cluster" not in header:
            raise DataError(f"{path}: no 'cluster' column in assignments file")
        idx = header.index("cluster")
        values = []
        for i, row in enumerate(reader):
            try:
                values.append(int(float(row[idx])))
            except (ValueError, IndexError):
                raise DataError(f"{path}: bad cluster value at row {i + 2}") from None
    return np.asarray(values, dtype=np.int64)


def cmd_eval(args) -> int:
    assignments = _read_assignments(Path(args.assignments))
    dataset = load_csv(Path(args.data), [], args.label_col)
    if len(assignments) != dataset.n:
        raise DataError(
            f"length mismatch: {len(assignments)} assignments vs {dataset.n} data rows"
        )

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    report: dict = {"n": dataset.n}
    if dataset.labels is not None:
        report["acc"] = clustering_accuracy(assignments, dataset.labels)
        report["nmi"] = nmi(assignments, dataset.labels)
        report["contingency"] = contingency_table(assignments, dataset.labels).tolist()
    profile = cluster_profiles(dataset, assignments)
    (out_dir / "metrics.json").write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    (out_dir / "profiles.csv").write_text(profile_to_csv(profile), encoding="utf-8")
    (out_dir / "profiles.txt").write_text(profile_to_text(profile), encoding="utf-8")
    if "acc" in report:
        print(f"ACC {report['acc']:.4f}  NMI {report['nmi']:.4f}  (n={dataset.n})")
    else:
        print(f"profiles written for {dataset.n} rows (no label column given)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="guidedcluster",
        description="Guided clustering: train, apply and evaluate a mixture-latent "
        "model steered by a guiding variable.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic benchmark CSV")
    g.add_argument("--out", required=True)
    g.add_argument("--k-true", type=int, default=3)
    g.add_argument("--n", type=int, default=5000)
    g.add_argument("--d-latent-true", type=int, default=2)
    g.add_argument("--d-x", type=int, default=50)
    g.add_argument("--d-y", type=int, default=2)
    g.add_argument("--cluster-separation", type=float, default=8.0)
    g.add_argument("--distractor-dims", type=int, default=45)
    g.add_argument("--distractor-scale", type=float, default=10.0)
    g.add_argument("--y-noise-sd", type=float, default=0.25)
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="run the full training pipeline on a CSV")
    t.add_argument("--data", required=True)
    t.add_argument("--guide-cols", required=True, help="comma-separated guide column names")
    t.add_argument("--label-col", default=None)
    t.add_argument("--out", required=True, help="run directory")
    t.add_argument("--config", default=None, help="JSON config mirroring TrainConfig")
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--mode", choices=["guided", "unguided_joint"], default=None)
    t.add_argument("--n-clusters", type=int, default=None)
    t.add_argument("--latent-dim", type=int, default=None)
    t.add_argument("--epochs-train", type=int, default=None)
    t.add_argument("--epochs-pretrain", type=int, default=None)
    t.add_argument("--batch-size", type=int, default=None)
    t.add_argument("--beta-train", type=float, default=None)
    t.add_argument("--save-latents", action="store_true")
    t.set_defaults(func=cmd_train)

    i = sub.add_parser("infer", help="assign clusters to a CSV with a trained checkpoint")
    i.add_argument("--checkpoint", required=True)
    i.add_argument("--data", required=True)
    i.add_argument("--out", required=True)
    i.add_argument("--guide-cols", default=None,
                   help="guide columns present in the file (ignored for guided inference)")
    i.add_argument("--label-col", default=None, help="label column to ignore")
    i.set_defaults(func=cmd_infer)

    e = sub.add_parser("eval", help="score assignments against labels and profile clusters")
    e.add_argument("--assignments", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--label-col", default=None)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_eval)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except DataError as err:
        print(f"data error: {err}", file=sys.stderr)
        return 3
    except NumericalError as err:
        print(f"numerical abort: {err}", file=sys.stderr)
        return 4


def main_entry() -> None:
    sys.exit(main())
