"""Command-line front end.

Subcommands::

    bench     run an (algorithm x function x dim x seed) grid
    compare   rank-sum / Friedman report over one or more bench directories
    gen-data  write a synthetic flow/PAWP dataset
    train     k-fold cross-validation of the CNN classifier
    hpo       hawk search over learning rate, decay factor and dropout

Every command writes a ``manifest.json`` with its full configuration; pass
that file back through ``--config`` to replay the run.  Exit status is 0 on
success, 2 on usage errors and 1 on runtime failures.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import __version__
from .benchfns import FUNCTION_IDS, get_function
from .errors import ContractViolation
from .optimizer import ACCEPTANCE_RULES, ALGORITHMS, OptimizerConfig, run
from .stats import compare, comparison_csv, summarize, tally

class UsageError(Exception):
    pass


# --- file helpers ----------------------------------------------------------

def write_atomic(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)
    return path


def write_manifest(out: Path, command: str, config: dict, extra: dict | None = None) -> Path:
    """``config`` minus the output location, so a manifest can be replayed elsewhere."""
    config = {k: v for k, v in config.items() if k != "out"}
    doc = {"command": command, "version": __version__, "config": config, **(extra or {})}
    return write_atomic(out / "manifest.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")


def parse_list(text, cast=str) -> list:
    if isinstance(text, (list, tuple)):
        return [cast(x) for x in text]
    return [cast(x) for x in str(text).split(",") if x.strip()]


def parse_seeds(text) -> list:
    """``"0-4"`` (inclusive range), ``"1,5,9"`` or a list of ints."""
    if isinstance(text, int):
        return [text]
    if isinstance(text, (list, tuple)):
        return [int(x) for x in text]
    seeds = []
    for part in str(text).split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = (int(x) for x in part.split("-", 1))
            if hi < lo:
                raise UsageError(f"empty seed range {part!r}")
            seeds.extend(range(lo, hi + 1))
        elif part:
            seeds.append(int(part))
    if not seeds:
        raise UsageError("no seeds given")
    return seeds


def apply_config(args, command: str) -> dict:
    """Merge ``--config`` JSON (a plain dict or a previous manifest) over the
    parsed flags and return the effective configuration."""
    cfg = {k: v for k, v in vars(args).items() if k not in ("config", "command", "handler", "jobs")}
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        if "config" in doc and "command" in doc:
            if doc["command"] != command:
                raise UsageError(f"manifest is for {doc['command']!r}, not {command!r}")
            doc = doc["config"]
        unknown = set(doc) - set(cfg)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(doc)
    return cfg


# --- bench ------------------------------------------------------------------

def _bench_task(task):
    alg, fid, dim, seed, pop, iters, acceptance = task
    cfg = OptimizerConfig(pop, iters, seed, alg, acceptance=acceptance)
    return run(get_function(fid, dim), cfg)


def cmd_bench(args) -> int:
    cfg = apply_config(args, "bench")
    functions = parse_list(cfg["functions"])
    algorithms = parse_list(cfg["algorithms"])
    dims = parse_list(cfg["dims"], int)
    seeds = parse_seeds(cfg["seeds"])
    for f in functions:
        if f not in FUNCTION_IDS:
            raise UsageError(f"unknown function {f!r}; known: {', '.join(FUNCTION_IDS)}")
    for a in algorithms:
        if a not in ALGORITHMS:
            raise UsageError(f"unknown algorithm {a!r}; known: {', '.join(ALGORITHMS)}")
    if cfg["acceptance"] not in ACCEPTANCE_RULES:
        raise UsageError(f"unknown acceptance rule {cfg['acceptance']!r}")
    try:
        OptimizerConfig(cfg["pop"], cfg["iters"])
        for d in dims:
            get_function(functions[0], d)
    except ContractViolation as exc:
        raise UsageError(str(exc)) from exc
    cfg.update(functions=functions, algorithms=algorithms, dims=dims, seeds=seeds)

    out = Path(cfg["out"])
    tasks = [(a, f, d, s, cfg["pop"], cfg["iters"], cfg["acceptance"])
             for a in algorithms for f in functions for d in dims for s in seeds]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as ex:
            records = list(ex.map(_bench_task, tasks))
    else:
        records = [_bench_task(t) for t in tasks]

    groups = defaultdict(list)
    for r in records:
        write_atomic(out / "traces" / f"{r.stem}.csv", r.trace_csv())
        write_atomic(out / "runs" / f"{r.stem}.json", r.summary_json())
        groups[(r.algorithm, r.function, r.dim)].append(r)

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["algorithm", "function", "dim", "runs", "mean", "std"])
    for (a, f, d), rs in groups.items():
        s = summarize(rs)
        w.writerow([a, f, d, s.n, repr(s.mean), repr(s.std)])
    write_atomic(out / "summary.csv", buf.getvalue())

    if cfg["plot"]:
        from .plotting import convergence_plot
        for f in functions:
            for d in dims:
                traces = {a: [r.best_trace for r in groups[(a, f, d)]] for a in algorithms}
                fn = get_function(f, d)
                convergence_plot(traces, out / "plots" / f"{f}__d{d}.svg", f"{f} (D={d})", fn.known_optimum)
    write_manifest(out, "bench", cfg)
    sys.stdout.write(buf.getvalue())
    return 0


# --- compare ----------------------------------------------------------------

def load_runs(directory) -> list[dict]:
    runs = sorted(Path(directory).glob("runs/*.json"))
    if not runs:
        raise UsageError(f"no run summaries under {directory}/runs")
    return [json.loads(p.read_text()) for p in runs]


def gather_samples(directories) -> dict:
    """``samples[function][label]`` from bench outputs; an algorithm found in
    several directories is labelled ``alg#1``, ``alg#2`` ... in argument order."""
    per_dir = [load_runs(d) for d in directories]
    seen = defaultdict(int)
    for runs in per_dir:
        for alg in {r["algorithm"] for r in runs}:
            seen[alg] += 1
    counter = defaultdict(int)
    samples: dict = defaultdict(lambda: defaultdict(list))
    dims = {r["dim"] for runs in per_dir for r in runs}
    for runs in per_dir:
        labels = {}
        for alg in sorted({r["algorithm"] for r in runs}):
            if seen[alg] > 1:
                counter[alg] += 1
                labels[alg] = f"{alg}#{counter[alg]}"
            else:
                labels[alg] = alg
        for r in sorted(runs, key=lambda r: (r["function"], r["dim"], r["seed"])):
            key = r["function"] if len(dims) == 1 else f"{r['function']}@d{r['dim']}"
            samples[key][labels[r["algorithm"]]].append(r["final_fitness"])
    return {f: dict(v) for f, v in samples.items()}


def cmd_compare(args) -> int:
    cfg = apply_config(args, "compare")
    samples = gather_samples(cfg["dirs"])
    labels = sorted({a for f in samples.values() for a in f})
    if len(labels) < 2:
        raise UsageError("need at least two algorithms to compare")
    ref = cfg["reference"] or ("hho_plus" if "hho_plus" in labels else labels[0])
    if ref not in labels:
        raise UsageError(f"reference {ref!r} not among {labels}")
    try:
        rows, fr = compare(samples, ref, cfg["alpha"])
    except ContractViolation as exc:
        raise UsageError(str(exc)) from exc

    out = Path(cfg["out"])
    write_atomic(out / "comparison.csv", comparison_csv(rows))
    report = io.StringIO()
    report.write(f"reference: {ref}\n")
    report.write(comparison_csv(rows))
    for alg, c in tally(rows).items():
        report.write(f"# {ref} vs {alg}: +{c['+']} ={c['=']} -{c['-']}\n")
    if fr is None:
        report.write("# Friedman mean rank: not computed (needs at least 2 functions)\n")
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["algorithm", "mean_rank", "position"])
        for i, a in enumerate(fr.ordering, start=1):
            w.writerow([a, f"{fr.mean_rank[a]:.6g}", i])
        write_atomic(out / "friedman.csv", buf.getvalue())
        report.write("# Friedman mean rank: "
                     + ", ".join(f"{a}={fr.mean_rank[a]:.4g}" for a in fr.ordering) + "\n")
    write_atomic(out / "report.txt", report.getvalue())
    write_manifest(out, "compare", {**cfg, "reference": ref})
    sys.stdout.write(report.getvalue())
    return 0


# --- data / training --------------------------------------------------------

def _load_labeled(path):
    from .pipeline.dataset import build_dataset
    from .pipeline.synthetic import load_dataset
    if path is None:
        raise UsageError("--data is required (directly or via --config)")
    if not (Path(path) / "manifest.json").exists():
        raise UsageError(f"no dataset manifest in {path}")
    return build_dataset(load_dataset(path))


def cmd_gen_data(args) -> int:
    from .pipeline.dataset import build_dataset
    from .pipeline.synthetic import generate_synthetic, save_dataset
    cfg = apply_config(args, "gen-data")
    try:
        records = generate_synthetic(cfg["subjects"], cfg["segments"], cfg["abnormal_fraction"], cfg["seed"])
    except ContractViolation as exc:
        raise UsageError(str(exc)) from exc
    data = build_dataset(records)
    counts = data.class_counts()
    stats = {"segments": len(data), "normal": int(counts[0]), "abnormal": int(counts[1]),
             "label_agreement": data.label_agreement(), "fallback_labels": int(data.fallback.sum())}
    out = Path(cfg["out"])
    # the dataset manifest doubles as the replay manifest
    config = {k: v for k, v in cfg.items() if k != "out"}
    save_dataset(records, out, {"command": "gen-data", "version": __version__, "config": config, "labels": stats})
    print(json.dumps(stats, sort_keys=True))
    return 0


def _hyper_from(cfg):
    """Hyperparameters from ``--hyper`` (an hpo ``best.json``), overridden by explicit flags."""
    from .pipeline.training import TrainingHyperparameters
    merged = {}
    if cfg.get("hyper"):
        doc = json.loads(Path(cfg["hyper"]).read_text())
        merged.update(doc.get("best", doc))
    flags = {"ilr": cfg["ilr"], "lrdf": cfg["lrdf"], "dp": cfg["dp"], "drop_period": cfg["drop_period"],
             "batch_size": cfg["batch_size"], "max_iterations": cfg["train_iters"]}
    merged.update({k: v for k, v in flags.items() if v is not None})
    return TrainingHyperparameters(**merged)


def cmd_train(args) -> int:
    from .neuralnet.network import NetworkSpec
    from .pipeline.folds import stratified_kfold
    from .pipeline.training import train_and_evaluate
    cfg = apply_config(args, "train")
    if cfg["head"] not in ("fenn", "enn", "mlp"):
        raise UsageError(f"unknown head {cfg['head']!r}")
    data = _load_labeled(cfg["data"])
    try:
        hyper = _hyper_from(cfg)
        groups = data.subject_ids if cfg["subject_integrity"] else None
        folds = stratified_kfold(data.labels, cfg["folds"], cfg["seed"], groups)
    except (ContractViolation, TypeError) as exc:
        raise UsageError(str(exc)) from exc
    spec = NetworkSpec.default(cfg["head"], data.X.shape[1], cfg["hidden"])
    res = train_and_evaluate(spec, data, folds, hyper, cfg["seed"], args.jobs)
    out = Path(cfg["out"])
    write_atomic(out / f"folds_{cfg['head']}.csv", res.per_fold_csv())
    write_atomic(out / f"summary_{cfg['head']}.csv", res.summary_csv())
    write_manifest(out, "train", cfg, {"hyperparameters": hyper.to_json(),
                                        "failed_folds": res.failed})
    sys.stdout.write(res.summary_csv())
    for f in res.folds:
        if f.failed:
            print(f"fold {f.fold} failed: {f.diagnostic}", file=sys.stderr)
    return 1 if len(res.failed) == len(res.folds) else 0


def cmd_hpo(args) -> int:
    from .neuralnet.network import NetworkSpec
    from .pipeline.folds import stratified_kfold
    from .pipeline.hpo import HPOSettings, hpo_search
    from .pipeline.training import train_and_evaluate
    cfg = apply_config(args, "hpo")
    data = _load_labeled(cfg["data"])
    base = HPOSettings().training
    if cfg["train_iters"] is not None:
        base = replace(base, max_iterations=cfg["train_iters"])
    if cfg["drop_period"] is not None:
        base = replace(base, drop_period=cfg["drop_period"])
    if not (1 <= cfg["pop"] and 1 <= cfg["iters"] and 1 <= cfg["repeats"]):
        raise UsageError("pop, iters and repeats must be positive")
    if cfg["algorithm"] not in ALGORITHMS:
        raise UsageError(f"unknown algorithm {cfg['algorithm']!r}; known: {', '.join(ALGORITHMS)}")
    settings = HPOSettings(cfg["pop"], cfg["iters"], cfg["repeats"], cfg["algorithm"], cfg["seed"], base)
    spec = NetworkSpec.default(cfg["head"], data.X.shape[1], cfg["hidden"])
    res = hpo_search(spec, data, settings)
    out = Path(cfg["out"])
    write_atomic(out / "trace.csv", res.trace_csv())
    doc = {"best": res.best.to_json(), "best_fitness": res.best_fitness,
           "best_trace": [float(v) for v in res.record.best_trace]}
    if cfg["cv_folds"]:
        folds = stratified_kfold(data.labels, cfg["cv_folds"], cfg["seed"])
        cv = train_and_evaluate(spec, data, folds, res.best, cfg["seed"], args.jobs)
        write_atomic(out / "cv_folds.csv", cv.per_fold_csv())
        write_atomic(out / "cv_summary.csv", cv.summary_csv())
        doc["cv_mean"] = cv.mean
    write_atomic(out / "best.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")
    if cfg["plot"]:
        from .plotting import hpo_trace_plot
        hpo_trace_plot(res.trace, out / "trace.svg")
    write_manifest(out, "hpo", cfg)
    print(json.dumps(doc["best"], sort_keys=True))
    return 0


# --- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hawkfenn", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_default):
        sp.add_argument("--out", default=out_default, help="output directory")
        sp.add_argument("--config", help="JSON file (or manifest) overriding flags")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes")

    b = sub.add_parser("bench", help="benchmark optimizers")
    b.add_argument("--functions", default="sphere,rastrigin")
    b.add_argument("--algorithms", default="hho_plus,hho")
    b.add_argument("--dims", default="30")
    b.add_argument("--seeds", default="0-4", help="e.g. 0-29 or 1,2,3")
    b.add_argument("--pop", type=int, default=30)
    b.add_argument("--iters", type=int, default=500)
    b.add_argument("--acceptance", default="rabbit", help="HHO+ candidate acceptance: rabbit or greedy")
    b.add_argument("--plot", action=argparse.BooleanOptionalAction, default=True)
    common(b, "results/bench")
    b.set_defaults(handler=cmd_bench)

    c = sub.add_parser("compare", help="rank-sum and Friedman report")
    c.add_argument("dirs", nargs="+", help="bench output directories")
    c.add_argument("--reference", default=None)
    c.add_argument("--alpha", type=float, default=0.05)
    common(c, "results/compare")
    c.set_defaults(handler=cmd_compare)

    g = sub.add_parser("gen-data", help="write a synthetic dataset")
    g.add_argument("--subjects", type=int, default=20)
    g.add_argument("--segments", type=int, default=90, help="segments per subject")
    g.add_argument("--abnormal-fraction", type=float, default=459 / 1797)
    g.add_argument("--seed", type=int, default=0)
    common(g, "results/data")
    g.set_defaults(handler=cmd_gen_data)

    t = sub.add_parser("train", help="k-fold cross-validation")
    t.add_argument("--data", help="dataset directory from gen-data")
    t.add_argument("--head", default="fenn", help="fenn, enn or mlp")
    t.add_argument("--hidden", type=int, default=20)
    t.add_argument("--folds", type=int, default=5)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--ilr", type=float, default=None)
    t.add_argument("--lrdf", type=float, default=None)
    t.add_argument("--dp", type=float, default=None)
    t.add_argument("--drop-period", type=int, default=None)
    t.add_argument("--batch-size", type=int, default=None)
    t.add_argument("--train-iters", type=int, default=None)
    t.add_argument("--hyper", default=None, help="best.json from hpo")
    t.add_argument("--subject-integrity", action="store_true")
    common(t, "results/train")
    t.set_defaults(handler=cmd_train)

    h = sub.add_parser("hpo", help="hyperparameter search")
    h.add_argument("--data", help="dataset directory from gen-data")
    h.add_argument("--head", default="fenn")
    h.add_argument("--hidden", type=int, default=20)
    h.add_argument("--pop", type=int, default=6)
    h.add_argument("--iters", type=int, default=5)
    h.add_argument("--repeats", type=int, default=3)
    h.add_argument("--algorithm", default="hho_plus")
    h.add_argument("--train-iters", type=int, default=None)
    h.add_argument("--drop-period", type=int, default=None)
    h.add_argument("--seed", type=int, default=0)
    h.add_argument("--cv-folds", type=int, default=0, help="retrain best values with k-fold CV (0 = skip)")
    h.add_argument("--plot", action=argparse.BooleanOptionalAction, default=True)
    common(h, "results/hpo")
    h.set_defaults(handler=cmd_hpo)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except UsageError as exc:
        print(f"hawkfenn {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"hawkfenn {args.command}: failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
