"""Command-line front end.

``ptmoo run CONFIG``
    Execute ``repetitions`` runs (seeds ``seed``, ``seed + 1``, ...) and write
    one JSON trace and one CSV per run into the output directory.
``ptmoo compare DIR [DIR ...] --out FILE``
    Per-iteration median and interquartile range of the preferred design,
    grouped by strategy and surrogate.

Configs are YAML mappings; see ``configs/`` for examples. Unknown keys and
invalid values are reported with the line they appear on.
"""
import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields, replace
from pathlib import Path

import numpy as np
import yaml

from .driver import RunAborted, RunConfig, RunTrace, kpls_components, run_optimization
from .errors import ConfigurationError, PtmooError
from .moga import GaConfig
from .problems import get_problem

log = logging.getLogger("ptmoo")

_RUN_KEYS = {f.name for f in fields(RunConfig)} | {"shared_initial"}
_GA_KEYS = {f.name for f in fields(GaConfig)}


def _key_lines(text):
    """Map top-level and ``ga.`` keys to their 1-based line numbers."""
    lines = {}
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return lines
    if not isinstance(root, yaml.MappingNode):
        return lines
    for key, value in root.value:
        lines[key.value] = key.start_mark.line + 1
        if isinstance(value, yaml.MappingNode):
            for sub, _ in value.value:
                lines[f"{key.value}.{sub.value}"] = sub.start_mark.line + 1
    return lines


def parse_config(text, source="<config>"):
    """Parse YAML text into a validated :class:`RunConfig`."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigurationError(f"{source}: invalid YAML: {getattr(exc, 'problem', exc)}",
                                 line=None if mark is None else mark.line + 1) from None
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{source}: top level must be a mapping", line=1)
    lines = _key_lines(text)
    for key in raw:
        if key not in _RUN_KEYS:
            raise ConfigurationError(f"{source}: unknown key {key!r}", line=lines.get(key))
    ga_raw = raw.pop("ga", {}) or {}
    if not isinstance(ga_raw, dict):
        raise ConfigurationError(f"{source}: 'ga' must be a mapping", line=lines.get("ga"))
    for key in ga_raw:
        if key not in _GA_KEYS:
            raise ConfigurationError(f"{source}: unknown ga key {key!r}", line=lines.get(f"ga.{key}"))
    shared = raw.pop("shared_initial", False)
    try:
        ga = GaConfig(**ga_raw)
    except (ConfigurationError, TypeError) as exc:
        raise ConfigurationError(f"{source}: ga: {exc}", line=lines.get("ga")) from None
    try:
        cfg = RunConfig(ga=ga, **raw)
        if shared and cfg.initial_seed is None:
            cfg = replace(cfg, initial_seed=cfg.seed)
        problem = get_problem(cfg.problem, **cfg.problem_options)
    except (ConfigurationError, TypeError) as exc:
        key = next((k for k in raw if k in str(exc)), None)
        raise ConfigurationError(f"{source}: {exc}", line=lines.get(key)) from None
    h = kpls_components(cfg.surrogate)
    if h is not None and h > problem.d:
        raise ConfigurationError(f"{source}: KPLS h={h} exceeds problem dimension {problem.d}",
                                 line=lines.get("surrogate"))
    return cfg


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, str(path))


def run_label(cfg):
    return f"{cfg.problem}_{cfg.strategy}_{cfg.surrogate}_seed{cfg.seed}"


def _atomic_write(path, text):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.chmod(tmp, 0o644)  # mkstemp creates 0600
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def trace_csv(trace):
    """Per-iteration CSV text: new observation, online preferred design, aggregate.

    ``aggregate`` re-selects the preferred design with the trace-wide
    objective extremes, so it is non-increasing over iterations.
    """
    n_f = trace.objectives.shape[1]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["iteration"] + [f"f{k + 1}" for k in range(n_f)] + ["feasible"]
                    + [f"pref_f{k + 1}" for k in range(n_f)] + ["aggregate"])
    _, aggs = trace.recomputed_preferred()
    feasible = trace.feasible
    for rec, agg in zip(trace.records, aggs):
        if rec.row is None:
            new = [""] * n_f + [""]
        else:
            new = [repr(float(v)) for v in trace.objectives[rec.row]] + [int(feasible[rec.row])]
        if rec.preferred_row is None:
            pref = [""] * n_f
        else:
            pref = [repr(float(v)) for v in trace.objectives[rec.preferred_row]]
        writer.writerow([rec.iteration] + new + pref + ["" if math.isnan(agg) else repr(float(agg))])
    return buf.getvalue()


def write_trace(trace, out_dir, label):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _atomic_write(out_dir / f"{label}.json", json.dumps(trace.to_json_dict(), indent=1))
    _atomic_write(out_dir / f"{label}.csv", trace_csv(trace))


def _run_one(cfg):
    problem = get_problem(cfg.problem, **cfg.problem_options)
    label = run_label(cfg)
    try:
        # flush the partial trace after every iteration so a crash leaves an audit trail
        trace = run_optimization(problem, cfg,
                                 on_iteration=lambda t: write_trace(t, cfg.output_dir, label))
    except RunAborted as exc:
        write_trace(exc.trace, cfg.output_dir, label)
        return label, f"aborted: {exc}"
    write_trace(trace, cfg.output_dir, label)
    return label, None


def cmd_run(config_path, workers=1, seed=None, output_dir=None):
    """Run every repetition of a config; returns the process exit status."""
    try:
        cfg = load_config(config_path)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if seed is not None:
        cfg = replace(cfg, seed=seed, initial_seed=seed if cfg.initial_seed is not None else None)
    if output_dir is not None:
        cfg = replace(cfg, output_dir=str(output_dir))
    Path(cfg.output_dir).mkdir(parents=True, exist_ok=True)
    runs = [cfg.for_repetition(k) for k in range(cfg.repetitions)]
    if workers > 1 and len(runs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, runs))
    else:
        results = [_run_one(r) for r in runs]
    status = 0
    for label, err in results:
        if err:
            print(f"{label}: {err}", file=sys.stderr)
            status = 1
        else:
            log.info("%s: done", label)
    return status


def nearest_rank(values, q):
    """Nearest-rank percentile ``q`` in (0, 100] of a non-empty sequence."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        raise ValueError("no values")
    k = max(1, math.ceil(q / 100.0 * v.size))
    return float(v[k - 1])


def load_traces(dirs):
    traces = []
    for d in dirs:
        paths = sorted(Path(d).glob("*.json"))
        if not paths:
            raise ConfigurationError(f"no trace files in {d}")
        for p in paths:
            with open(p) as fh:
                traces.append(RunTrace.from_json_dict(json.load(fh)))
    return traces


def group_label(trace):
    return f"{trace.config['strategy']}:{trace.config['surrogate']}"


def comparison_rows(traces):
    """Tidy summary rows ``(group, iteration, objective, median, q25, q75)``.

    The preferred design at every iteration is re-selected with objective
    extremes pooled over all traces, so groups share one yardstick.
    """
    problems = {t.problem for t in traces}
    if len(problems) > 1:
        raise ConfigurationError(f"traces mix problems: {sorted(problems)}")
    F = np.vstack([t.objectives for t in traces])
    fmin, fmax = F.min(axis=0), F.max(axis=0)
    n_f = F.shape[1]
    series = {}
    for t in traces:
        rows, aggs = t.recomputed_preferred(fmin, fmax)
        for rec, row, agg in zip(t.records, rows, aggs):
            if row is None:
                continue
            values = list(t.objectives[row]) + [agg]
            series.setdefault((group_label(t), rec.iteration), []).append(values)
    names = [f"f{k + 1}" for k in range(n_f)] + ["aggregate"]
    out = []
    for (group, it) in sorted(series):
        vals = np.array(series[(group, it)])
        for j, name in enumerate(names):
            col = vals[:, j]
            out.append((group, it, name, nearest_rank(col, 50), nearest_rank(col, 25),
                        nearest_rank(col, 75)))
    return out


def cmd_compare(dirs, out):
    try:
        rows = comparison_rows(load_traces(dirs))
    except (ConfigurationError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["strategy", "iteration", "objective", "median", "q25", "q75"])
    for group, it, name, med, q25, q75 in rows:
        writer.writerow([group, it, name, repr(med), repr(q25), repr(q75)])
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    _atomic_write(out, buf.getvalue())
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="ptmoo", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="execute the runs described by a config file")
    run.add_argument("config")
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--seed", type=int, default=None, help="override the base seed")
    run.add_argument("--out", default=None, help="override the output directory")
    cmp_ = sub.add_parser("compare", help="summarise trace directories")
    cmp_.add_argument("dirs", nargs="+")
    cmp_.add_argument("--out", required=True)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            return cmd_run(args.config, args.workers, args.seed, args.out)
        return cmd_compare(args.dirs, args.out)
    except PtmooError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
