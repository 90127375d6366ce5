"""Command-line interface: ``python -m flowtune <command> ...``.

Every command writes a manifest next to its outputs recording the resolved
arguments, the seed and content digests of the inputs. ``rerun`` replays a
manifest, optionally into a different output location.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .config_space import PRESETS, ConfigSpace, FittedPipeline, PipelineConfig, fit_pipeline, preset
from .dataset import SynthesisSpec, holdout_split, load_csv, planted_spec, synthesize
from .dodge import dodge_optimize
from .experiment import StudyReport, run_study, standard_treatments
from .flash import METRIC_ALIASES, flash_optimize, metric_name, write_history
from .learners import LEARNER_KINDS, LearnerSpec
from .metrics import FAR_MODES, score
from .preprocess import PREPROCESSOR_KINDS, PreprocessorSpec

SEED_ENV = "FLOWTUNE_SEED"
MANIFEST_NAME = "manifest.json"
# Keys that are measured wall-clock time and may differ between replays.
TIMING_KEYS = frozenset({"seconds"})


class CliError(Exception):
    """A failure worth a one-line diagnostic rather than a traceback."""


@dataclass
class RunManifest:
    command: str
    params: dict
    seed: int | None
    inputs: dict[str, str] = field(default_factory=dict)
    version: str = __version__

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> RunManifest:
        return cls(**json.loads(text))

    def write(self, path: Path) -> None:
        path.write_text(self.to_json(), encoding="utf-8")


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def strip_timing(obj):
    """Drop timing keys anywhere in a JSON-like structure."""
    if isinstance(obj, dict):
        return {k: strip_timing(v) for k, v in obj.items() if k not in TIMING_KEYS}
    if isinstance(obj, list):
        return [strip_timing(v) for v in obj]
    return obj


# --------------------------------------------------------------------------
# argument helpers


def positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def metric_arg(text: str) -> str:
    if text not in METRIC_ALIASES:
        raise argparse.ArgumentTypeError(f"unknown metric {text!r}; choose from {sorted(METRIC_ALIASES)}")
    return metric_name(text)


def key_value(text: str) -> tuple[str, object]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def resolve_seed(seed: int | None) -> int:
    if seed is not None:
        return seed
    env = os.environ.get(SEED_ENV)
    if env is None or env == "":
        return 0
    try:
        return int(env)
    except ValueError:
        raise CliError(f"{SEED_ENV} must be an integer, got {env!r}") from None


def load_space(name: str) -> ConfigSpace:
    if name in PRESETS:
        return preset(name)
    path = Path(name)
    if path.is_file():
        return ConfigSpace.from_json(path.read_text(encoding="utf-8"))
    raise CliError(f"unknown space {name!r}; choose from {list(PRESETS)} or give a space JSON file")


def _digest_inputs(*paths) -> dict[str, str]:
    return {str(Path(p).resolve()): sha256_file(p) for p in paths if p is not None}


def _file_manifest_path(out: Path) -> Path:
    return out.with_name(out.name + ".manifest.json")


def _prepare_dir(path: Path) -> Path:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create output directory {path}: {exc.strerror}") from None
    return path


def _write_text(path: Path, text: str) -> None:
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc.strerror}") from None


# --------------------------------------------------------------------------
# commands


def cmd_gen(args) -> RunManifest:
    seed = resolve_seed(args.seed)
    if args.spec:
        spec = dataclasses.replace(SynthesisSpec.from_json(Path(args.spec).read_text(encoding="utf-8")), seed=seed)
    elif args.planted:
        spec = planted_spec(seed)
    else:
        spec = SynthesisSpec(
            n_per_class=(args.per_class,) * args.classes,
            n_features=args.features,
            class_shift=(0.0,) + (args.shift,) * (args.classes - 1),
            noise_sd=args.noise,
            seed=seed,
        )
    data = synthesize(spec)
    out = Path(args.out)
    try:
        data.to_csv(out, label_column=args.label)
    except OSError as exc:
        raise CliError(f"cannot write {out}: {exc.strerror}") from None
    manifest = RunManifest("gen", _params(args), seed, _digest_inputs(args.spec))
    manifest.params["synthesis"] = json.loads(spec.to_json())
    manifest.write(_file_manifest_path(out))
    return manifest


def cmd_train(args) -> RunManifest:
    seed = resolve_seed(args.seed)
    data = load_csv(args.data, args.label)
    config = PipelineConfig(
        PreprocessorSpec(args.preprocessor, dict(args.pre_param)),
        LearnerSpec(args.learner, dict(args.param)),
    )
    pipe = fit_pipeline(config, data, seed)
    out = Path(args.out)
    _write_text(out, json.dumps(pipe.to_dict(), sort_keys=True))
    manifest = RunManifest("train", _params(args), seed, _digest_inputs(args.data))
    manifest.write(_file_manifest_path(out))
    return manifest


def cmd_predict(args) -> RunManifest:
    pipe = FittedPipeline.from_dict(json.loads(Path(args.model).read_text(encoding="utf-8")))
    classes = pipe.model.class_names
    data = load_csv(args.data, args.label, {name: i for i, name in enumerate(classes)})
    if data.feature_names != pipe.model.feature_names:
        raise CliError(f"{args.data} columns do not match the model's training columns")
    predicted = pipe.predict(data)
    out = Path(args.out)
    try:
        with open(out, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["row", "predicted"])
            for i, p in enumerate(predicted):
                w.writerow([i, classes[p]])
    except OSError as exc:
        raise CliError(f"cannot write {out}: {exc.strerror}") from None
    objectives = score(data.labels, predicted, len(classes), args.far_mode)
    _write_text(out.with_name(out.name + ".scores.json"), json.dumps(objectives.to_dict(), sort_keys=True) + "\n")
    manifest = RunManifest("predict", _params(args), None, _digest_inputs(args.model, args.data))
    manifest.write(_file_manifest_path(out))
    return manifest


def cmd_tune(args) -> RunManifest:
    seed = resolve_seed(args.seed)
    space = load_space(args.space)
    tune = load_csv(args.data, args.label)
    if args.validation:
        validation = load_csv(args.validation, args.label, {n: i for i, n in enumerate(tune.class_names)})
    else:
        keep, held = holdout_split(tune.labels, args.validation_fraction, seed)
        tune, validation = tune.subset(keep), tune.subset(held)
    if args.optimizer == "flash":
        best, history = flash_optimize(
            space, tune, validation, (args.metric,), budget=args.budget, pool_size=args.pool_size,
            init_size=args.init_size, seed=seed, far_mode=args.far_mode,
        )
    else:
        best, history = dodge_optimize(
            space, tune, validation, args.metric, n=args.budget, epsilon=args.epsilon, seed=seed,
            far_mode=args.far_mode,
        )
    out = _prepare_dir(Path(args.out_dir))
    write_history(out / "history.jsonl", history)
    _write_text(out / "best_config.json", json.dumps(best.config.to_dict(), indent=1, sort_keys=True) + "\n")
    space_file = args.space if args.space not in PRESETS else None
    manifest = RunManifest("tune", _params(args), seed, _digest_inputs(args.data, args.validation, space_file))
    manifest.write(out / MANIFEST_NAME)
    return manifest


def cmd_study(args) -> RunManifest:
    seed = resolve_seed(args.seed)
    data = load_csv(args.data, args.label)
    treatments = standard_treatments(args.metric, args.budget)
    if args.treatments:
        wanted = [t.strip() for t in args.treatments.split(",") if t.strip()]
        by_lower = {t.name.lower(): t for t in treatments}
        unknown = [w for w in wanted if w.lower() not in by_lower]
        if unknown:
            raise CliError(f"unknown treatment(s) {unknown}; choose from {[t.name for t in treatments]}")
        treatments = [by_lower[w.lower()] for w in wanted]
    report = run_study(data, treatments, k=args.folds, seed=seed, jobs=args.jobs)
    out = _prepare_dir(Path(args.out_dir))
    write_report(report, out)
    manifest = RunManifest("study", _params(args), seed, _digest_inputs(args.data))
    manifest.write(out / MANIFEST_NAME)
    return manifest


def write_report(report: StudyReport, out: Path) -> None:
    _write_text(out / "study.json", report.to_json() + "\n")
    _write_text(out / "metrics.txt", report.render_metrics() + "\n")
    _write_text(out / "timing.txt", report.render_timing() + "\n")
    _write_text(out / "importance.txt", report.render_importance() + "\n")


def cmd_report(args) -> RunManifest:
    report = StudyReport.from_dict(json.loads(Path(args.study).read_text(encoding="utf-8")))
    parts = {"metrics": report.render_metrics, "timing": report.render_timing, "importance": report.render_importance}
    chosen = list(parts) if args.table == "all" else [args.table]
    text = "\n\n".join(parts[name]() for name in chosen) + "\n"
    if args.out is None:
        sys.stdout.write(text)
        return RunManifest("report", _params(args), None, _digest_inputs(args.study))
    out = Path(args.out)
    _write_text(out, text)
    manifest = RunManifest("report", _params(args), None, _digest_inputs(args.study))
    manifest.write(_file_manifest_path(out))
    return manifest


def cmd_rerun(args) -> RunManifest:
    manifest = RunManifest.from_json(Path(args.manifest).read_text(encoding="utf-8"))
    for path, digest in manifest.inputs.items():
        if not Path(path).is_file():
            raise CliError(f"input {path} recorded in the manifest is missing")
        if sha256_file(path) != digest:
            raise CliError(f"input {path} changed since the manifest was written")
    params = dict(manifest.params)
    params.pop("synthesis", None)
    params["seed"] = manifest.seed
    if args.out is not None:
        key = "out_dir" if "out_dir" in params else "out"
        params[key] = args.out
    for key in ("param", "pre_param"):
        if key in params:
            params[key] = [tuple(kv) for kv in params[key]]
    return COMMANDS[manifest.command](argparse.Namespace(command=manifest.command, **params))


# Arguments naming files; recorded as absolute paths.
PATH_ARGS = ("data", "validation", "model", "study", "spec", "out", "out_dir")


def _params(args) -> dict:
    out = {}
    for key, value in sorted(vars(args).items()):
        # The resolved seed has its own manifest field.
        if key in ("command", "seed"):
            continue
        if value is not None and (key in PATH_ARGS or (key == "space" and Path(value).is_file())):
            value = str(Path(value).resolve())
        out[key] = value
    return out


COMMANDS = {
    "gen": cmd_gen,
    "train": cmd_train,
    "predict": cmd_predict,
    "tune": cmd_tune,
    "study": cmd_study,
    "report": cmd_report,
    "rerun": cmd_rerun,
}


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flowtune", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"flowtune {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def seeded(p):
        p.add_argument("--seed", type=int, default=None, help=f"random seed (default: ${SEED_ENV} or 0)")

    p = sub.add_parser("gen", help="write a synthetic labelled flow CSV")
    p.add_argument("--classes", type=positive_int, default=4)
    p.add_argument("--per-class", type=positive_int, default=500)
    p.add_argument("--features", type=positive_int, default=10)
    p.add_argument("--shift", type=float, default=2.0, help="class shift magnitude along each signature")
    p.add_argument("--noise", type=float, default=1.0)
    p.add_argument("--planted", action="store_true", help="the 4-class regime-mixture benchmark dataset")
    p.add_argument("--spec", default=None, help="synthesis parameters as a JSON file")
    p.add_argument("--label", default="label")
    p.add_argument("--out", required=True)
    seeded(p)

    p = sub.add_parser("train", help="fit one preprocessor + learner pipeline")
    p.add_argument("--data", required=True)
    p.add_argument("--label", default="label")
    p.add_argument("--learner", choices=LEARNER_KINDS, default="gbt")
    p.add_argument("--param", type=key_value, action="append", default=[], help="learner key=value (repeatable)")
    p.add_argument("--preprocessor", choices=PREPROCESSOR_KINDS, default="none")
    p.add_argument("--pre-param", type=key_value, action="append", default=[], help="preprocessor key=value")
    p.add_argument("--out", required=True)
    seeded(p)

    p = sub.add_parser("predict", help="label a CSV with a trained pipeline")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--label", default="label")
    p.add_argument("--far-mode", choices=FAR_MODES, default="tp_tn")
    p.add_argument("--out", required=True)

    p = sub.add_parser("tune", help="search a configuration space with FLASH or DODGE")
    p.add_argument("--data", required=True)
    p.add_argument("--validation", default=None, help="separate validation CSV (default: hold out part of --data)")
    p.add_argument("--validation-fraction", type=float, default=0.2)
    p.add_argument("--label", default="label")
    p.add_argument("--optimizer", choices=("flash", "dodge"), default="flash")
    p.add_argument("--metric", type=metric_arg, default="f_measure", help="recall, f or g")
    p.add_argument("--budget", type=positive_int, default=30)
    p.add_argument("--pool-size", type=positive_int, default=1000)
    p.add_argument("--init-size", type=positive_int, default=10)
    p.add_argument("--epsilon", type=float, default=0.2)
    p.add_argument("--space", default="gbt-only", help=f"one of {', '.join(PRESETS)} or a JSON file")
    p.add_argument("--far-mode", choices=FAR_MODES, default="tp_tn")
    p.add_argument("--out-dir", required=True)
    seeded(p)

    p = sub.add_parser("study", help="k-fold comparison of tuned and default treatments")
    p.add_argument("--data", required=True)
    p.add_argument("--label", default="label")
    p.add_argument("--treatments", default=None, help="comma-separated subset, e.g. cart,rf")
    p.add_argument("--metric", type=metric_arg, default="f_measure")
    p.add_argument("--budget", type=positive_int, default=30)
    p.add_argument("--folds", type=positive_int, default=10)
    p.add_argument("--jobs", type=positive_int, default=1)
    p.add_argument("--out-dir", required=True)
    seeded(p)

    p = sub.add_parser("report", help="render tables from a saved study")
    p.add_argument("--study", required=True)
    p.add_argument("--table", choices=("all", "metrics", "timing", "importance"), default="all")
    p.add_argument("--out", default=None)

    p = sub.add_parser("rerun", help="replay a run manifest")
    p.add_argument("manifest")
    p.add_argument("--out", default=None, help="redirect the outputs (file or directory, as the command expects)")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except (CliError, ValueError, OSError, KeyError, RuntimeError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"flowtune {args.command}: error: {msg}", file=sys.stderr)
        return 1
    return 0
