"""Command-line interface: ``fcmgen {simulate,learn,evaluate,synth}``.

Exit status is 0 on success, 1 on a runtime failure and 2 on a usage error
(bad flags, missing input files, impossible sample sizes).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import os
import re
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .data import (
    ConceptSchema,
    LongitudinalDataset,
    SyntheticSpec,
    format_float,
    generate_synthetic,
    load_longitudinal,
    load_schema,
    normalize,
    read_matrix,
    read_vector,
    save_longitudinal,
    save_schema,
    write_matrix,
    write_trajectory,
)
from .errors import FCMError
from .evaluation import evaluate_population, normality_screen
from .fcm import ActivationSpec, SimulationSpec, simulate_fcm
from .ga import GaConfig, LearnResult
from .normality import MIN_SAMPLE
from .population import MEAN_ID, config_digest, one_fits_all, one_for_each

log = logging.getLogger("fcmgen")

SEED_ENV = "FCMGEN_SEED"

PRESETS = {
    "table": {},
    # the population procedures call the learner with a 10^6 generation cap
    "paper": {"max_generations": 1_000_000},
}


class UsageError(Exception):
    pass


def _sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _require_file(path, what):
    if path is None or not Path(path).is_file():
        raise UsageError(f"{what} not found: {path}")
    return Path(path)


def _activation(args) -> ActivationSpec:
    return ActivationSpec(args.activation, args.steepness)


def _write_manifest(out_dir: Path, args, started: float, **extra) -> None:
    inputs = {}
    for name in ("dataset", "schema", "weights", "baseline", "config", "results"):
        p = getattr(args, name, None)
        if p is not None and Path(p).is_file():
            inputs[name] = {"path": str(p), "sha256": _sha256_file(p)}
    outputs = {}
    for f in sorted(out_dir.rglob("*")):
        if f.is_file() and f.name != "manifest.json":
            outputs[str(f.relative_to(out_dir))] = _sha256_file(f)
    flags = {k: v for k, v in vars(args).items() if k != "func"}
    manifest = {
        "tool": "fcmgen",
        "version": __version__,
        "command": args.command,
        "flags": flags,
        "inputs": inputs,
        "outputs": outputs,
        "duration_s": round(time.perf_counter() - started, 3),
        **extra,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, default=str) + "\n")


def verify_manifest(out_dir) -> bool:
    """Recompute input and output digests and compare them with the manifest."""
    out_dir = Path(out_dir)
    m = json.loads((out_dir / "manifest.json").read_text())
    for rec in m["inputs"].values():
        if _sha256_file(rec["path"]) != rec["sha256"]:
            return False
    return all(_sha256_file(out_dir / f) == h for f, h in m["outputs"].items())


def _load_dataset(args) -> LongitudinalDataset:
    path = _require_file(args.dataset, "dataset")
    if args.schema is None:
        return load_longitudinal(path)
    schema = load_schema(_require_file(args.schema, "schema"))
    return normalize(load_longitudinal(path, schema), schema)


def _safe_name(pid: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", pid)


# --- simulate ---------------------------------------------------------------

def cmd_simulate(args) -> int:
    w, labels = read_matrix(_require_file(args.weights, "weights file"))
    a0, _ = read_vector(_require_file(args.baseline, "baseline file"))
    outputs = frozenset(int(x) for x in args.outputs.split(",") if x.strip()) if args.outputs else frozenset()
    sim = SimulationSpec(args.steps, outputs, args.threshold)
    traj, stable = simulate_fcm(a0, w, _activation(args), sim, return_stabilized=True)
    log.info("%d steps computed, stabilized=%s", traj.shape[0] - 1, stable)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            write_trajectory(fh, traj, labels)
    else:
        write_trajectory(sys.stdout, traj, labels)
    return 0


# --- learn ------------------------------------------------------------------

def _ga_config(args) -> GaConfig:
    d = dict(PRESETS[args.preset])
    if args.config:
        d.update(json.loads(_require_file(args.config, "config file").read_text()))
    if "activation" in d and isinstance(d["activation"], dict):
        d["activation"] = ActivationSpec(**d["activation"])
    overrides = {
        "max_generations": args.max_generations,
        "gen_size": args.gen_size,
        "fitness_threshold": args.threshold,
        "p_crossover": args.p_crossover,
        "p_mutation": args.p_mutation,
        "n_mutation": args.n_mutation,
        "mutation_schedule": args.mutation_schedule,
        "fitness_mode": args.fitness,
    }
    d.update({k: v for k, v in overrides.items() if v is not None})
    if args.activation is not None or "activation" not in d:
        d["activation"] = ActivationSpec(args.activation or "sigmoid", args.steepness)
    if args.seed is not None:
        d["seed"] = args.seed
    elif "seed" not in d:
        d["seed"] = int(os.environ.get(SEED_ENV, 0))
    if args.paper_literal:
        d["track_best"] = False
    return GaConfig.from_dict(d)


def _write_summary(path, rows):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["participant_id", "file", "fitness", "generations_used", "reached_threshold", "restart"])
        out.writerows(rows)


def cmd_learn(args) -> int:
    started = time.perf_counter()
    data = _load_dataset(args)
    config = _ga_config(args)
    threads = args.threads or os.cpu_count() or 1
    early = not args.exhaustive
    out_dir = Path(args.out)
    wdir = out_dir / "weights"
    wdir.mkdir(parents=True, exist_ok=True)
    rows = []

    if args.mode == "one-for-each" or args.mode == "single":
        if args.mode == "single":
            if args.participant is None:
                raise UsageError("--mode single requires --participant")
            try:
                part = data.get(args.participant)
            except KeyError:
                raise UsageError(f"participant {args.participant!r} not in dataset") from None
            data = LongitudinalDataset(data.concept_labels, [part])
        result = one_for_each(data, config, args.restarts, threads=threads, early_exit=early)
        for pid in data.ids():
            r = result.per_participant[pid]
            fname = _safe_name(pid) + ".csv"
            write_matrix(wdir / fname, r.weights, data.concept_labels)
            rows.append([pid, fname, format_float(r.fitness), r.generations_used,
                         str(r.reached_threshold).lower(), result.restart_used[pid]])
        digest = result.config_digest
    else:
        r = one_fits_all(data, config, args.restarts, threads=threads, early_exit=early)
        fname = MEAN_ID + ".csv"
        write_matrix(wdir / fname, r.weights, data.concept_labels)
        rows.append([MEAN_ID, fname, format_float(r.fitness), r.generations_used,
                     str(r.reached_threshold).lower(), ""])
        digest = config_digest(config, data, args.restarts)

    _write_summary(out_dir / "summary.csv", rows)
    _write_manifest(
        out_dir, args, started,
        mode=args.mode,
        restarts=args.restarts,
        config=config.to_dict(),
        dataset_digest=data.digest(),
        config_digest=digest,
    )
    log.info("wrote %d matrix file(s) to %s", len(rows), wdir)
    return 0


# --- evaluate ---------------------------------------------------------------

def _load_results(results_dir: Path, n: int):
    summary = results_dir / "summary.csv"
    if not summary.is_file():
        raise UsageError(f"no summary.csv in {results_dir}")
    mats = {}
    with summary.open(newline="") as fh:
        for rec in csv.DictReader(fh):
            w, _ = read_matrix(results_dir / "weights" / rec["file"])
            if w.shape[0] != n:
                raise FCMError(f"matrix for {rec['participant_id']} has n={w.shape[0]}, dataset has n={n}")
            mats[rec["participant_id"]] = w
    return mats


def cmd_evaluate(args) -> int:
    started = time.perf_counter()
    data = _load_dataset(args)
    results_dir = Path(args.results)
    if not results_dir.is_dir():
        raise UsageError(f"results directory not found: {results_dir}")
    manifest_path = results_dir / "manifest.json"
    activation = ActivationSpec()
    if manifest_path.is_file():
        cfg = json.loads(manifest_path.read_text()).get("config")
        if cfg:
            activation = ActivationSpec(**cfg["activation"])
    if args.activation is not None:
        activation = _activation(args)
    mats = _load_results(results_dir, data.n)

    sample_size = args.sample_size if args.sample_size is not None else min(100, data.p)
    if not 1 <= sample_size <= data.p:
        raise UsageError(f"--sample-size {sample_size} must lie in [1, {data.p}]")
    if args.normality and data.p < MIN_SAMPLE:
        raise UsageError(f"--normality needs at least {MIN_SAMPLE} participants, dataset has {data.p}")
    if set(mats) == {MEAN_ID}:
        result = LearnResult(mats[MEAN_ID], float("nan"), 0, False)
    else:
        missing = set(data.ids()) - set(mats)
        if missing:
            raise FCMError(f"no learned matrix for participant(s) {sorted(missing)[:5]}")
        result = mats
    seed = args.seed if args.seed is not None else int(os.environ.get(SEED_ENV, 0))
    report = evaluate_population(data, result, sample_size, np.random.default_rng(seed), activation)

    out_dir = Path(args.out) if args.out else results_dir / "evaluation"
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "error_report.csv", "w", newline="") as fh:
        report.write_csv(fh)
    with open(out_dir / "error_report.json", "w") as fh:
        report.write_json(fh)
    if args.normality:
        with open(out_dir / "normality.csv", "w", newline="") as fh:
            normality_screen(data).write_csv(fh)
    _write_manifest(out_dir, args, started, dataset_digest=data.digest())
    print(f"max |mean error| = {report.max_abs_error:.6g}, mean |mean error| = {report.mean_abs_error:.6g}")
    return 0


# --- synth ------------------------------------------------------------------

def cmd_synth(args) -> int:
    started = time.perf_counter()
    seed = args.seed if args.seed is not None else int(os.environ.get(SEED_ENV, 0))
    spec = SyntheticSpec(args.p, args.n, args.T, args.density, args.noise_sd, seed, _activation(args))
    data, truth = generate_synthetic(spec)
    out_dir = Path(args.out)
    # same layout as a learn results directory, so `evaluate` accepts it
    (out_dir / "truth" / "weights").mkdir(parents=True, exist_ok=True)
    save_longitudinal(data, out_dir / "dataset.csv")
    save_schema(ConceptSchema.unit(data.concept_labels), out_dir / "schema.json")
    for pid, w in truth.items():
        write_matrix(out_dir / "truth" / "weights" / f"{_safe_name(pid)}.csv", w, data.concept_labels)
    _write_summary(
        out_dir / "truth" / "summary.csv",
        [[pid, f"{_safe_name(pid)}.csv", "1.0", 0, "true", ""] for pid in truth],
    )
    spec_d = dataclasses.asdict(spec)
    _write_manifest(out_dir, args, started, synthetic_spec=spec_d, dataset_digest=data.digest())
    return 0


# --- parser -----------------------------------------------------------------

def _add_activation(p, default="sigmoid"):
    p.add_argument("--activation", choices=["sigmoid", "clip"], default=default)
    p.add_argument("--lambda", dest="steepness", type=float, default=1.0, help="sigmoid steepness")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fcmgen", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"fcmgen {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one map forward from a baseline")
    p.add_argument("--weights", required=True)
    p.add_argument("--baseline", required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--threshold", type=float, default=0.0, help="stabilization threshold")
    p.add_argument("--outputs", default="", help="comma-separated output concept indices")
    p.add_argument("--out")
    _add_activation(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("learn", help="learn maps from longitudinal data")
    p.add_argument("dataset")
    p.add_argument("--schema")
    p.add_argument("--mode", choices=["one-for-each", "one-fits-all", "single"], default="one-for-each")
    p.add_argument("--participant", help="participant id for --mode single")
    p.add_argument("--restarts", type=int, default=100)
    p.add_argument("--seed", type=int)
    p.add_argument("--fitness", choices=["trajectory", "endpoint"])
    p.add_argument("--config", help="JSON file with GaConfig fields")
    p.add_argument("--preset", choices=sorted(PRESETS), default="table")
    p.add_argument("--max-generations", type=int)
    p.add_argument("--gen-size", type=int)
    p.add_argument("--threshold", type=float, help="fitness threshold")
    p.add_argument("--p-crossover", type=float)
    p.add_argument("--p-mutation", type=float)
    p.add_argument("--n-mutation", type=int)
    p.add_argument("--mutation-schedule", choices=["constant", "decaying"])
    _add_activation(p, default=None)
    p.add_argument("--threads", type=int, help="worker processes (default: all cores)")
    p.add_argument("--exhaustive", action="store_true", help="run every restart even after a threshold hit")
    p.add_argument("--paper-literal", action="store_true",
                   help="at the generation cap return the best of the final generation only")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("evaluate", help="error report of learned maps against data")
    p.add_argument("dataset")
    p.add_argument("results")
    p.add_argument("--schema")
    p.add_argument("--sample-size", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--normality", action="store_true")
    p.add_argument("--out")
    _add_activation(p, default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synth", help="generate a synthetic dataset with known maps")
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--density", type=float, default=1.0)
    p.add_argument("--noise-sd", type=float, default=0.0)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    _add_activation(p)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as e:
        print(f"fcmgen {args.command}: error: {e}", file=sys.stderr)
        return 2
    except (FCMError, ValueError, OSError) as e:
        print(f"fcmgen {args.command}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
