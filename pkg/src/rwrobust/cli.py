"""Command-line front end.

Subcommands: estimate, compare, sweep, analytic, check-convergence.
All randomness derives from --seed (environment fallback RWROBUST_SEED);
running the same command twice with the same seed, with any worker count,
produces byte-identical report files.  Exit codes: 0 success, 1 usage
error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import analytic, dataio
from .classifiers import (
    ConstantClassifier,
    CornerClassifier,
    ExternalClassifier,
    LinearClassifier,
)
from .counterfactual import SearchConfig, adversarial_scores, find_counterfactual
from .errors import RwRobustError
from .perturbation import SampleStream, load_perturbation_model
from .robustness import (
    SEARCH_COUNTER,
    FlipConfig,
    convergence_check,
    estimate_dataset,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # usage problems exit 1, not argparse's default 2
    def error(self, message):
        self.exit(1, f"{self.prog}: error: {message}\n")


@dataclass(frozen=True)
class RunConfig:
    """One validated subcommand invocation; usage problems surface here."""

    subcommand: str
    model_spec: str | None
    data_path: Path | None
    schema_path: Path | None
    perturb_path: Path | None
    n_samples: int
    seed: int
    out_path: Path
    workers: int

    def __post_init__(self):
        if self.n_samples < 1:
            raise UsageError("--samples must be >= 1")
        if self.workers < 1:
            raise UsageError("--workers must be >= 1")
        for path in (self.data_path, self.schema_path, self.perturb_path):
            if path is not None and not path.exists():
                raise UsageError(f"file not found: {path}")


def _run_config(args) -> RunConfig:
    return RunConfig(
        subcommand=args.subcommand,
        model_spec=getattr(args, "model", None),
        data_path=Path(args.data) if getattr(args, "data", None) else None,
        schema_path=Path(args.schema) if getattr(args, "schema", None) else None,
        perturb_path=Path(args.perturb) if getattr(args, "perturb", None) else None,
        n_samples=getattr(args, "samples", 10000),
        seed=args.seed,
        out_path=Path(args.out),
        workers=getattr(args, "workers", 1),
    )


def _default_seed(value):
    if value is not None:
        return int(value)
    env = os.environ.get("RWROBUST_SEED")
    return int(env) if env else 0


def _parse_floats(text):
    return [float(v) for v in text.split(",") if v != ""]


def build_model(spec: str, n_features: int):
    """Parse a model descriptor into (classifier, provider, cleanup).

    Builtin descriptors: ``builtin:linear:w=0,1:b=0``,
    ``builtin:corner:a=1,2[:idx=0,1]``, ``builtin:constant:label=0``.
    ``external:<command>`` launches the command and talks the line
    protocol; with several workers, one process is spawned per worker.
    """
    if spec.startswith("external:"):
        command = spec[len("external:") :]
        if not command.strip():
            raise UsageError("external model descriptor has no command")
        handles = []

        def provider():
            handle = ExternalClassifier(command, n_features)
            handles.append(handle)
            return handle

        def cleanup():
            for h in handles:
                h.close()

        first = provider()
        first.self_test(np.zeros((2, n_features)))
        return first, provider, cleanup

    if not spec.startswith("builtin:"):
        raise UsageError(f"model descriptor must start with builtin: or external:, got {spec!r}")
    parts = spec.split(":")
    kind = parts[1] if len(parts) > 1 else ""
    params = {}
    for part in parts[2:]:
        if "=" not in part:
            raise UsageError(f"malformed model parameter {part!r}")
        key, value = part.split("=", 1)
        params[key] = value
    try:
        if kind == "linear":
            w = _parse_floats(params.pop("w"))
            b = float(params.pop("b", "0"))
            model = LinearClassifier(w=tuple(w), b=b)
            if model.n_features != n_features:
                raise UsageError(
                    f"linear model has {model.n_features} weights but the data "
                    f"has {n_features} features"
                )
        elif kind == "corner":
            a = _parse_floats(params.pop("a"))
            if len(a) != 2:
                raise UsageError("corner model needs a=a1,a2")
            idx = tuple(int(v) for v in params.pop("idx", "0,1").split(","))
            model = CornerClassifier(a1=a[0], a2=a[1], idx=idx)
        elif kind == "constant":
            model = ConstantClassifier(label=params.pop("label", "0"))
        else:
            raise UsageError(f"unknown builtin model {kind!r}")
    except KeyError as exc:
        raise UsageError(f"builtin:{kind} is missing parameter {exc}") from None
    if params:
        raise UsageError(f"unknown model parameter(s) {sorted(params)}")
    return model, None, lambda: None


def _flip_config(args) -> FlipConfig:
    if getattr(args, "regression_gamma", None) is not None:
        return FlipConfig(mode="regression", gamma=args.regression_gamma)
    return FlipConfig()


def _load_inputs(args):
    with open(args.schema, encoding="utf-8") as fh:
        schema = json.load(fh)
    data = dataio.load_csv(args.data, schema)
    model = load_perturbation_model(args.perturb, kinds=data.kinds)
    return data, model


def _counterfactuals(f, data, seed, search_cfg):
    results = []
    for i in range(data.n_rows):
        stream = SampleStream(seed, int(data.source_rows[i]), SEARCH_COUNTER)
        results.append(
            find_counterfactual(
                f,
                data.features[i],
                search_cfg,
                stream,
                continuous_idx=data.continuous_indices(),
            )
        )
    return results


def _report_failures(failures):
    for failure in failures:
        print(f"error: {failure}", file=sys.stderr)
    return 2 if failures else 0


def cmd_estimate(args) -> int:
    data, model = _load_inputs(args)
    f, provider, cleanup = build_model(args.model, data.n_features)
    try:
        estimates, failures = estimate_dataset(
            f,
            data,
            model,
            args.samples,
            args.seed,
            _flip_config(args),
            workers=args.workers,
            classifier_provider=provider,
        )
    finally:
        cleanup()
    dataio.atomic_write(args.out, dataio.render_report(estimates))
    return _report_failures(failures)


def cmd_compare(args) -> int:
    data, model = _load_inputs(args)
    f, provider, cleanup = build_model(args.model, data.n_features)
    try:
        estimates, failures = estimate_dataset(
            f,
            data,
            model,
            args.samples,
            args.seed,
            _flip_config(args),
            workers=args.workers,
            classifier_provider=provider,
        )
        if failures:
            return _report_failures(failures)
        search_cfg = SearchConfig(
            n_directions=args.search_dirs, max_radius=args.max_radius
        )
        adversarial = adversarial_scores(
            _counterfactuals(f, data, args.seed, search_cfg)
        )
    finally:
        cleanup()
    report = dataio.compare_report(estimates, adversarial)
    dataio.atomic_write(args.out, dataio.render_compare_report(report, estimates))
    print(f"pearson={dataio.fmt9(report.pearson)},spearman={dataio.fmt9(report.spearman)}")
    return 0


def cmd_sweep(args) -> int:
    data, model = _load_inputs(args)
    scales = _parse_floats(args.scales)
    f, provider, cleanup = build_model(args.model, data.n_features)
    try:
        curve = dataio.scale_sweep(
            f,
            data,
            model,
            scales,
            args.samples,
            args.seed,
            _flip_config(args),
            search_cfg=SearchConfig(
                n_directions=args.search_dirs, max_radius=args.max_radius
            ),
            workers=args.workers,
        )
    finally:
        cleanup()
    dataio.atomic_write(args.out, dataio.render_sweep(curve))
    return 0


def cmd_check_convergence(args) -> int:
    data, model = _load_inputs(args)
    seeds = [
        int(s)
        for s in np.random.SeedSequence(entropy=args.seed).generate_state(
            args.repeats, dtype=np.uint64
        )
    ]
    f, provider, cleanup = build_model(args.model, data.n_features)
    try:
        report = convergence_check(
            f,
            data,
            model,
            args.samples,
            seeds,
            _flip_config(args),
            workers=args.workers,
            classifier_provider=provider,
        )
    finally:
        cleanup()
    dataio.atomic_write(args.out, dataio.render_convergence(report))
    print(f"min_correlation={dataio.fmt9(report.min_correlation)}")
    for run in report.degenerate_runs:
        print(f"degenerate: run {run} has all points equally robust", file=sys.stderr)
    return 0


def _parse_case(spec: str):
    parts = spec.split(":")
    params = {}
    for part in parts[1:]:
        key, value = part.split("=", 1)
        params[key] = value
    if parts[0] == "linear":
        w = _parse_floats(params["w"])
        return analytic.LinearCase(w1=w[0], w2=w[1], b=float(params.get("b", "0")))
    if parts[0] == "corner":
        a = _parse_floats(params["a"])
        return analytic.CornerCase(a1=a[0], a2=a[1])
    raise UsageError(f"unknown analytic case {parts[0]!r}")


def cmd_analytic(args) -> int:
    case = _parse_case(args.case)
    sigma = _parse_floats(args.sigma)
    if len(sigma) != 2:
        raise UsageError("--sigma needs two values: s1,s2")
    u = analytic.GaussianUncertainty2D(sigma1=sigma[0], sigma2=sigma[1])
    try:
        lo, hi, count = args.grid.split(":")
        lo, hi, count = float(lo), float(hi), int(count)
    except ValueError:
        raise UsageError(f"--grid must be lo:hi:count, got {args.grid!r}") from None
    x1, x2, p_r, d_cf = analytic.grid_eval(case, u, (lo, hi), (lo, hi), count)
    dataio.atomic_write(args.out, dataio.render_grid(x1, x2, p_r, d_cf))
    return 0


def _add_common(sub, with_model=True):
    if with_model:
        sub.add_argument("--model", required=True, help="builtin:... or external:<command>")
        sub.add_argument("--data", required=True, help="test points CSV (with header)")
        sub.add_argument("--schema", required=True, help="JSON schema for the CSV")
        sub.add_argument("--perturb", required=True, help="perturbation config JSON")
        sub.add_argument(
            "--samples", type=int, default=10000, help="perturbed samples per point"
        )
        sub.add_argument(
            "--workers", type=int, default=1, help="worker threads (results identical)"
        )
        sub.add_argument(
            "--regression-gamma",
            type=float,
            default=None,
            help="regression mode: output changes larger than this count as flips",
        )
    sub.add_argument(
        "--seed",
        type=int,
        default=None,
        help="master seed (default: RWROBUST_SEED environment variable, else 0)",
    )
    sub.add_argument("--out", required=True, help="output CSV path (written atomically)")


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rwrobust", description=__doc__)
    subs = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    est = subs.add_parser("estimate", help="per-point robustness report")
    _add_common(est)
    est.set_defaults(func=cmd_estimate)

    cmp_ = subs.add_parser(
        "compare", help="robustness report with counterfactual-distance columns"
    )
    _add_common(cmp_)
    cmp_.add_argument("--search-dirs", type=int, default=256, help="search directions")
    cmp_.add_argument("--max-radius", type=float, default=10.0, help="search radius cap")
    cmp_.set_defaults(func=cmd_compare)

    sweep = subs.add_parser("sweep", help="correlation curve over perturbation scales")
    _add_common(sweep)
    sweep.add_argument("--scales", required=True, help="ascending scales, e.g. 0.1,1,10")
    sweep.add_argument("--search-dirs", type=int, default=256, help="search directions")
    sweep.add_argument("--max-radius", type=float, default=10.0, help="search radius cap")
    sweep.set_defaults(func=cmd_sweep)

    conv = subs.add_parser(
        "check-convergence", help="repeat estimation and correlate the runs"
    )
    _add_common(conv)
    conv.add_argument("--repeats", type=int, default=20, help="number of repeat runs")
    conv.set_defaults(func=cmd_check_convergence)

    ana = subs.add_parser("analytic", help="closed-form robustness/distance grid")
    ana.add_argument("--case", required=True, help="linear:w=0,1:b=0 or corner:a=1,2")
    ana.add_argument("--sigma", required=True, help="noise s1,s2")
    ana.add_argument("--grid", required=True, help="lo:hi:count, both axes")
    _add_common(ana, with_model=False)
    ana.set_defaults(func=cmd_analytic)
    return parser


def _merge_dash_values(argv):
    # argparse mistakes values like "-3:3:50" for flags; fold them into --flag=value
    merged = []
    skip = False
    for i, token in enumerate(argv):
        if skip:
            skip = False
            continue
        if token in ("--grid", "--sigma") and i + 1 < len(argv):
            merged.append(f"{token}={argv[i + 1]}")
            skip = True
        else:
            merged.append(token)
    return merged


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser = make_parser()
    args = parser.parse_args(_merge_dash_values(list(argv)))
    args.seed = _default_seed(args.seed)
    try:
        _run_config(args)  # validates the shared invariants up front
        return args.func(args)
    except UsageError as exc:
        print(f"rwrobust: error: {exc}", file=sys.stderr)
        return 1
    except RwRobustError as exc:
        print(f"rwrobust: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"rwrobust: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
