"""Command-line interface.

Subcommands: ``descriptors``, ``code``, ``train``, ``predict``,
``evaluate``, ``sweep-dim``, ``synth``, and ``manifest``. Every command
accepts ``--config FILE`` (the key=value grammar of :mod:`crpshape.config`)
with flags overriding file values, writes machine-readable JSON/CSV
atomically, and echoes the effective configuration into its outputs.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import coding as coding_mod
from . import dataset as dataset_mod
from . import evaluation as evaluation_mod
from . import mesh as mesh_mod
from . import projection as projection_mod
from . import spectral as spectral_mod
from . import svm as svm_mod
from ._ioutil import atomic_write_text, dumps_json, fmt17
from .config import ConfigError, RunConfig, load_config, render_config
from .errors import (
    CholeskyFailure,
    ConvergenceFailure,
    IterationBudgetExceeded,
    PipelineError,
    SingularSystem,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3

BUNDLE_FORMAT_VERSION = 1

DEFAULT_SYNTH_FAMILIES = (
    "ellipsoid:1,1,1;ellipsoid:1,1,1.5;ellipsoid:1,1,2.2"
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _add_common(sub):
    sub.add_argument("--config", help="key=value configuration file")
    sub.add_argument("--mesh-dir", dest="mesh_dir")
    sub.add_argument("--manifest")
    sub.add_argument("--cache")
    sub.add_argument("--out")
    sub.add_argument("--kind", choices=["gps", "shapedna"])
    sub.add_argument("--dim", type=int, help="descriptor dimension p")
    sub.add_argument("--baseline-dim", dest="baseline_p", type=int)
    sub.add_argument("--method", choices=["l2", "nnls"])
    sub.add_argument("--lambda", dest="ridge_lambda", type=float)
    sub.add_argument("--d", type=int, help="projection output dimension")
    sub.add_argument("--epsilon-reg", dest="epsilon_reg", type=float)
    sub.add_argument("--variant", choices=["crp", "baseline"])
    sub.add_argument("--mode", dest="protocol_mode", choices=["fraction", "kfold"])
    sub.add_argument("--train-fraction", dest="train_fraction", type=float)
    sub.add_argument("--folds", type=int)
    sub.add_argument("--repetitions", type=int)
    sub.add_argument("--seed", type=int)
    sub.add_argument("--c-grid", dest="c_grid")


_OVERRIDES = (
    "mesh_dir", "manifest", "cache", "out", "kind", "method", "ridge_lambda",
    "d", "epsilon_reg", "variant", "protocol_mode", "train_fraction",
    "folds", "repetitions", "seed", "baseline_p",
)


def _effective_config(args):
    cfg = RunConfig()
    if getattr(args, "config", None):
        cfg = load_config(args.config, base=cfg)
    for name in _OVERRIDES:
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    if getattr(args, "dim", None) is not None:
        cfg.p = args.dim
    if getattr(args, "c_grid", None):
        cfg.c_grid = tuple(float(t) for t in args.c_grid.replace(",", " ").split())
    return cfg


def build_parser():
    parser = _Parser(prog="crpshape", description=__doc__)
    commands = parser.add_subparsers(dest="command", required=True)

    sub = commands.add_parser("descriptors", help="compute and cache spectral descriptors")
    _add_common(sub)
    sub.add_argument("--force", action="store_true", help="recompute even when cached")

    sub = commands.add_parser("code", help="export the coding matrix for a dataset")
    _add_common(sub)

    sub = commands.add_parser("train", help="train a model bundle on a full dataset")
    _add_common(sub)

    sub = commands.add_parser("predict", help="predict labels with a trained bundle")
    _add_common(sub)
    sub.add_argument("--bundle", required=True, help="bundle directory from 'train'")

    sub = commands.add_parser("evaluate", help="repeated-split evaluation report")
    _add_common(sub)

    sub = commands.add_parser("sweep-dim", help="accuracy versus output dimension")
    _add_common(sub)
    sub.add_argument("--dims", required=True, help="comma-separated output dimensions")

    sub = commands.add_parser("synth", help="generate a synthetic labeled mesh set")
    _add_common(sub)
    sub.add_argument("--families", default=DEFAULT_SYNTH_FAMILIES,
                     help="semicolon-separated family:params class specs")
    sub.add_argument("--per-class", dest="per_class", type=int, default=30)
    sub.add_argument("--subdiv", type=int, default=2)
    sub.add_argument("--noise", type=float, default=0.01)

    sub = commands.add_parser("manifest", help="write a manifest for a mesh directory")
    _add_common(sub)
    sub.add_argument("--consecutive", type=int, required=True,
                     help="shapes per class, in natural filename order")

    return parser


def _require(cfg, *names):
    for name in names:
        if not getattr(cfg, name):
            raise ConfigError(f"missing required setting '{name}' (flag or config file)")


def _echo_config(path, cfg, extras=None):
    """Reproducibility echo: the effective configuration next to an output."""
    text = render_config(cfg)
    if extras:
        text += "".join(f"# {key} = {value}\n" for key, value in extras.items())
    atomic_write_text(f"{path}.config.ini", text)


# ---------------------------------------------------------------------------
# commands


def cmd_descriptors(args):
    cfg = _effective_config(args)
    if not cfg.cache and cfg.out:
        cfg.cache = cfg.out
    _require(cfg, "mesh_dir", "manifest", "cache")
    manifest = dataset_mod.read_manifest(cfg.manifest)
    cached = {}
    if os.path.exists(cfg.cache):
        cached = dataset_mod.read_descriptor_cache(cfg.cache)

    entries = []
    failures = 0
    computed = 0
    for filename, _label in manifest:
        path = dataset_mod.mesh_path(cfg.mesh_dir, filename)
        try:
            sha = dataset_mod.file_sha256(path)
            hit = cached.get(filename)
            if (
                not args.force
                and hit is not None
                and hit[1] == sha
                and hit[0].kind == cfg.kind
                and hit[0].p == cfg.p
            ):
                entries.append(hit)
                continue
            with open(path, encoding="utf-8") as handle:
                mesh = mesh_mod.parse_off(handle, name=filename)
            descriptor = spectral_mod.descriptor_for_mesh(mesh, cfg.kind, cfg.p)
            entries.append((descriptor, sha))
            computed += 1
        except (PipelineError, OSError, ValueError) as exc:
            failures += 1
            print(f"error: {filename}: {exc}", file=sys.stderr)
    dataset_mod.write_descriptor_cache(cfg.cache, entries)
    _echo_config(cfg.cache, cfg)
    print(
        f"descriptors: {len(entries)} cached ({computed} computed, "
        f"{len(entries) - computed} reused), {failures} failed -> {cfg.cache}"
    )
    return EXIT_DATA if failures else EXIT_OK


def _load_dataset(cfg):
    _require(cfg, "manifest", "cache")
    manifest = dataset_mod.read_manifest(cfg.manifest)
    entries = dataset_mod.read_descriptor_cache(cfg.cache)
    return dataset_mod.dataset_from_cache(entries, manifest, cfg.kind, cfg.p)


def cmd_code(args):
    cfg = _effective_config(args)
    _require(cfg, "out")
    ds = _load_dataset(cfg)
    dictionary = coding_mod.Dictionary(columns=ds.descriptors, names=ds.names)
    matrix = coding_mod.build_coding_matrix(dictionary, cfg.method, cfg.ridge_lambda)
    atomic_write_text(cfg.out, coding_mod.triplet_csv(matrix))
    atomic_write_text(cfg.out + ".json", dumps_json(coding_mod.coding_header(matrix), indent=2) + "\n")
    _echo_config(cfg.out, cfg)
    nz = matrix.column_nonzeros()
    print(
        f"coding: {matrix.n} samples, method={matrix.method}, "
        f"median nonzeros/column={float(np.median(nz))!r} -> {cfg.out}"
    )
    return EXIT_OK


def cmd_train(args):
    cfg = _effective_config(args)
    _require(cfg, "out")
    ds = _load_dataset(cfg)
    fitted = evaluation_mod.fit_pipeline(ds, np.arange(ds.n), cfg.pipeline_config())

    os.makedirs(cfg.out, exist_ok=True)
    files = {"config": "config.ini", "svm": "svm.json"}
    atomic_write_text(os.path.join(cfg.out, "config.ini"), render_config(cfg))
    atomic_write_text(
        os.path.join(cfg.out, "svm.json"),
        dumps_json(svm_mod.model_to_json(fitted.model), indent=2) + "\n",
    )
    if fitted.variant == "crp":
        files["projection"] = "projection.json"
        files["coding"] = "coding.csv"
        atomic_write_text(
            os.path.join(cfg.out, "projection.json"),
            dumps_json(projection_mod.projection_to_json(fitted.projection), indent=2) + "\n",
        )
        atomic_write_text(
            os.path.join(cfg.out, "coding.csv"), coding_mod.triplet_csv(fitted.coding)
        )
        atomic_write_text(
            os.path.join(cfg.out, "coding.csv.json"),
            dumps_json(coding_mod.coding_header(fitted.coding), indent=2) + "\n",
        )
    bundle = {
        "version": BUNDLE_FORMAT_VERSION,
        "variant": fitted.variant,
        "selectedC": fitted.selected_c,
        "files": files,
    }
    atomic_write_text(os.path.join(cfg.out, "bundle.json"), dumps_json(bundle, indent=2) + "\n")
    print(
        f"train: {ds.n} samples, variant={fitted.variant}, "
        f"c={fitted.selected_c!r} -> {cfg.out}"
    )
    return EXIT_OK


def _load_bundle(bundle_dir):
    with open(os.path.join(bundle_dir, "bundle.json"), encoding="utf-8") as handle:
        bundle = json.load(handle)
    if bundle.get("version") != BUNDLE_FORMAT_VERSION:
        raise ValueError(f"unsupported bundle version {bundle.get('version')!r}")
    cfg = load_config(os.path.join(bundle_dir, bundle["files"]["config"]))
    with open(os.path.join(bundle_dir, bundle["files"]["svm"]), encoding="utf-8") as handle:
        model = svm_mod.model_from_json(json.load(handle))
    pm = None
    if bundle["variant"] == "crp":
        with open(os.path.join(bundle_dir, bundle["files"]["projection"]), encoding="utf-8") as handle:
            pm = projection_mod.projection_from_json(json.load(handle))
    return bundle, cfg, model, pm


def cmd_predict(args):
    bundle, bundle_cfg, model, pm = _load_bundle(args.bundle)
    cfg = _effective_config(args)
    cfg.kind, cfg.p = bundle_cfg.kind, bundle_cfg.p
    _require(cfg, "manifest", "cache")
    ds = _load_dataset(cfg)
    if bundle["variant"] == "crp":
        feats = projection_mod.project(pm, ds.descriptors)
    else:
        feats = evaluation_mod.truncate_renormalize(ds.descriptors, bundle_cfg.baseline_p)
    predictions = svm_mod.predict_columns(model, feats)
    lines = ["name,label"] + [f"{n},{p}" for n, p in zip(ds.names, predictions)]
    text = "\n".join(lines) + "\n"
    if cfg.out:
        atomic_write_text(cfg.out, text)
        _echo_config(cfg.out, cfg)
        print(f"predict: {len(predictions)} shapes -> {cfg.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _report_json(report):
    doc = {
        "meanAccuracy": report.mean_accuracy,
        "stdAccuracy": report.std_accuracy,
        "perRunAccuracies": list(report.per_run_accuracies),
        "perRunC": list(report.per_run_c),
        "classLabels": list(report.class_labels),
        "confusion": [[int(v) for v in row] for row in report.confusion],
        "config": report.config,
    }
    return dumps_json(doc, indent=2) + "\n"


def _runs_csv(report):
    lines = ["run,accuracy,selectedC"]
    for run, (acc, c) in enumerate(zip(report.per_run_accuracies, report.per_run_c)):
        lines.append(f"{run},{fmt17(acc)},{c!r}")
    return "\n".join(lines) + "\n"


def cmd_evaluate(args):
    cfg = _effective_config(args)
    _require(cfg, "out")
    ds = _load_dataset(cfg)
    report = evaluation_mod.evaluate(ds, cfg.split_protocol(), cfg.pipeline_config())
    atomic_write_text(cfg.out, _report_json(report))
    atomic_write_text(cfg.out + ".runs.csv", _runs_csv(report))
    _echo_config(cfg.out, cfg)
    print(
        f"evaluate: variant={cfg.variant} method={cfg.method} kind={cfg.kind} "
        f"d={cfg.d} runs={cfg.repetitions}: "
        f"mean accuracy {report.mean_accuracy:.4f} +- {report.std_accuracy:.4f} -> {cfg.out}"
    )
    return EXIT_OK


def cmd_sweep_dim(args):
    cfg = _effective_config(args)
    _require(cfg, "out")
    dims = [int(t) for t in args.dims.replace(",", " ").split()]
    if not dims:
        raise ConfigError("--dims lists no dimensions")
    ds = _load_dataset(cfg)
    rows = evaluation_mod.sweep_dimension(ds, cfg.split_protocol(), cfg.pipeline_config(), dims)
    lines = ["d,meanAccuracy,stdAccuracy"]
    for d, mean, std in rows:
        lines.append(f"{d},{fmt17(mean)},{fmt17(std)}")
    atomic_write_text(cfg.out, "\n".join(lines) + "\n")
    _echo_config(cfg.out, cfg, extras={"dims": args.dims})
    for d, mean, std in rows:
        print(f"sweep-dim: d={d}: mean accuracy {mean:.4f} +- {std:.4f}")
    print(f"sweep-dim: {len(rows)} rows -> {cfg.out}")
    return EXIT_OK


def _parse_families(spec):
    classes = []
    for chunk in spec.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        family, _, params = chunk.partition(":")
        params = tuple(float(t) for t in params.replace(",", " ").split()) if params else ()
        classes.append((family.strip(), params))
    if not classes:
        raise ConfigError(f"no shape classes in families spec {spec!r}")
    return classes


def cmd_synth(args):
    cfg = _effective_config(args)
    _require(cfg, "out")
    classes = _parse_families(args.families)
    os.makedirs(cfg.out, exist_ok=True)
    rows = []
    for class_idx, (family, params) in enumerate(classes):
        label = f"{family}{class_idx:02d}"
        for member in range(args.per_class):
            seed = cfg.seed + class_idx * args.per_class + member
            filename = f"{label}_{member:03d}.off"
            mesh = mesh_mod.generate_shape(
                family, params, subdiv=args.subdiv, noise=args.noise,
                seed=seed, name=filename,
            )
            atomic_write_text(os.path.join(cfg.out, filename), mesh_mod.serialize_off(mesh))
            rows.append((filename, label))
    manifest_path = os.path.join(cfg.out, "manifest.csv")
    dataset_mod.write_manifest(manifest_path, rows)
    _echo_config(
        os.path.join(cfg.out, "synth"), cfg,
        extras={
            "families": args.families, "per_class": args.per_class,
            "subdiv": args.subdiv, "noise": args.noise,
        },
    )
    print(f"synth: {len(rows)} meshes in {len(classes)} classes -> {cfg.out}")
    return EXIT_OK


def cmd_manifest(args):
    cfg = _effective_config(args)
    _require(cfg, "mesh_dir", "out")
    names = [n for n in os.listdir(cfg.mesh_dir) if n.lower().endswith(".off")]
    if not names:
        raise FileNotFoundError(f"no .off files in {cfg.mesh_dir}")
    rows = dataset_mod.consecutive_manifest(names, args.consecutive)
    dataset_mod.write_manifest(cfg.out, rows)
    print(f"manifest: {len(rows)} shapes, {args.consecutive} per class -> {cfg.out}")
    return EXIT_OK


_COMMANDS = {
    "descriptors": cmd_descriptors,
    "code": cmd_code,
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "sweep-dim": cmd_sweep_dim,
    "synth": cmd_synth,
    "manifest": cmd_manifest,
}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConvergenceFailure, CholeskyFailure, IterationBudgetExceeded, SingularSystem) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (PipelineError, OSError, ValueError, KeyError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
