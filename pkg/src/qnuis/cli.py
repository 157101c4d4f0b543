"""Batch command-line frontend.

Subcommands: ``bound``, ``classify``, ``orthogonalize``, ``simulate``, and
``model``. Models are selected either with ``--model/--point/--interest``
flags or a JSON spec file {"zoo": ..., "config": {...}, "point": [...],
"partition": d_I}. Output is a single JSON object (default) or CSV with
numbers rendered to 9 significant digits; identical configurations and seeds
produce byte-identical output regardless of thread count.
"""

import argparse
import json
import sys

import numpy as np

from . import bounds as bounds_mod
from . import classify as classify_mod
from . import measurement, nuisance
from .errors import (ConfigError, ConsistencyError, ConvergenceError,
                     DimensionError, DomainError, InfeasibleError,
                     InvalidPOVMError, ModelError, ModelShapeError,
                     OptimizerError, QnuisError, RankError, RegularityError,
                     SingularOutcomeError, SingularQFIMError,
                     SingularStateError, StepError)
from .model import PAULIS, Partition, as_weight, evaluate, zoo_build

CONFIG_ERRORS = (ConfigError, DomainError, ModelError, DimensionError,
                 RankError, ModelShapeError, InvalidPOVMError, RegularityError)
NUMERIC_ERRORS = (SingularStateError, SingularQFIMError, SingularOutcomeError,
                  OptimizerError, InfeasibleError, StepError,
                  ConvergenceError, ConsistencyError)

PAULI_NAMES = {"sigma_x": PAULIS[0], "sigma_y": PAULIS[1], "sigma_z": PAULIS[2]}


def _sig9(x):
    if isinstance(x, float):
        return float(f"{x:.9g}")
    return x


def _render(obj):
    if isinstance(obj, dict):
        return {k: _render(v) for k, v in sorted(obj.items())}
    if isinstance(obj, (list, tuple)):
        return [_render(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return _sig9(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _render(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    return obj


def _emit_json(payload, stream=None):
    stream = stream or sys.stdout
    stream.write(json.dumps(_render(payload), sort_keys=True) + "\n")


def _emit_csv(payload, stream=None):
    stream = stream or sys.stdout
    flat = _render(payload)
    keys = sorted(flat.keys())
    stream.write(",".join(_csv_quote(k) for k in keys) + "\n")
    stream.write(",".join(_csv_quote(flat[k]) for k in keys) + "\n")


def _csv_quote(value):
    if isinstance(value, (dict, list)):
        value = json.dumps(value, sort_keys=True)
    text = str(value)
    if any(c in text for c in ',"\n'):
        text = '"' + text.replace('"', '""') + '"'
    return text


def _parse_config(text):
    if not text:
        return {}
    cfg = json.loads(text)
    if not isinstance(cfg, dict):
        raise ConfigError("--config must be a JSON object")
    return _decode_config(cfg)


def _decode_config(cfg):
    out = dict(cfg)
    if "F" in out:
        out["F"] = [_decode_operator(f) for f in out["F"]]
    if "basis" in out:
        out["basis"] = [_decode_operator(b) for b in out["basis"]]
    if "rho0" in out:
        out["rho0"] = _decode_operator(out["rho0"])
    return out


def _decode_operator(spec):
    if isinstance(spec, str):
        if spec not in PAULI_NAMES:
            raise ConfigError(f"unknown operator name {spec!r}")
        return PAULI_NAMES[spec]
    arr = np.asarray(spec, dtype=float)
    if arr.ndim == 3 and arr.shape[-1] == 2:  # [[ [re, im], ... ], ...]
        return arr[..., 0] + 1j * arr[..., 1]
    if arr.ndim == 2:
        return arr.astype(complex)
    raise ConfigError("operators must be 2-D real or [re, im]-pair arrays")


def _load_model(args):
    """Resolve (model, point, partition) from flags or a JSON spec file."""
    if getattr(args, "spec", None):
        with open(args.spec) as fh:
            spec = json.load(fh)
        name = spec.get("zoo")
        if not name:
            raise ConfigError("JSON model spec needs a 'zoo' name; "
                              "custom models are library-API only")
        model = zoo_build(name, _decode_config(spec.get("config", {})))
        point = spec.get("point")
        d_interest = spec.get("partition", model.dim_param)
    else:
        if not args.model:
            raise ConfigError("either --model or --spec is required")
        model = zoo_build(args.model, _parse_config(getattr(args, "config", None)))
        point = args.point
        d_interest = getattr(args, "interest", None) or model.dim_param
    if point is None:
        raise ConfigError("a parameter point is required")
    if isinstance(point, str):
        point = [float(v) for v in point.split(",")]
    point = np.asarray(point, dtype=float)
    if point.shape != (model.dim_param,):
        raise ConfigError(
            f"point has {point.size} coordinates, model needs {model.dim_param}")
    partition = Partition(int(d_interest), model.dim_param)
    return model, point, partition


def _parse_weight(text, k):
    if text in (None, "identity"):
        return np.eye(k)
    rows = [[float(v) for v in row.split(",")] for row in text.split(";")]
    return as_weight(np.asarray(rows), k)


def _add_model_flags(sub):
    sub.add_argument("--model", help="zoo model name")
    sub.add_argument("--point", help="comma-separated parameter values")
    sub.add_argument("--interest", type=int, help="number of interest parameters")
    sub.add_argument("--config", help="JSON object with zoo model options")
    sub.add_argument("--spec", help="JSON model spec file")
    sub.add_argument("--output", choices=("json", "csv"), default="json")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--threads", type=int, default=None)


def run_bound(args):
    model, point, partition = _load_model(args)
    weight = _parse_weight(args.weight, partition.d_interest)
    names = tuple(args.bounds.split(",")) if args.bounds else bounds_mod.KNOWN_BOUNDS
    report = bounds_mod.bound_report(model, point, partition, weight,
                                     bounds=names, seed=args.seed,
                                     threads=args.threads)
    payload = dict(report.values)
    payload["model"] = model.name
    payload["point"] = list(point)
    payload["d_interest"] = partition.d_interest
    payload["diagnostics"] = report.diagnostics
    (_emit_json if args.output == "json" else _emit_csv)(payload)
    return 0


def run_classify(args):
    model, point, partition = _load_model(args)
    grid = None
    if args.grid:
        grid = [np.asarray([float(v) for v in g.split(",")])
                for g in args.grid.split(";")]
    part = partition if partition.d_interest < model.dim_param else None
    report = classify_mod.classification_report(model, point, part, grid)
    payload = dict(report.flags)
    payload["residuals"] = report.residuals
    payload["scope"] = report.scope
    payload["model"] = model.name
    (_emit_json if args.output == "json" else _emit_csv)(payload)
    return 0


def run_orthogonalize(args):
    model, point, _ = _load_model(args)
    lo, hi, step = (float(v) for v in args.grid.split(":"))
    grid = np.arange(lo, hi + 0.5 * step, step)
    trajectory, residuals = nuisance.global_orthogonalize_ode(model, point, grid)
    stream = sys.stdout
    labels = ",".join(model.labels)
    stream.write(f"xi1,{labels},ortho_residual\n")
    for x, th, r in zip(grid, trajectory, residuals):
        vals = ",".join(f"{v:.9g}" for v in th)
        stream.write(f"{x:.9g},{vals},{r:.9g}\n")
    return 0


def run_simulate(args):
    model, point, partition = _load_model(args)
    povm = None
    if args.povm == "computational":
        dim = model.dim_hilbert
        povm = measurement.POVM(tuple(
            np.outer(np.eye(dim)[i], np.eye(dim)[i]).astype(complex)
            for i in range(dim)))
    elif args.povm == "pauli6":
        povm = measurement.pauli_six_outcome()
    elif args.povm == "ic":
        povm = measurement.default_ic_povm(model.dim_hilbert)
    elif args.povm == "optimal":
        povm, _ = measurement.optimal_pvm_scalar(model, point, partition)
    result = measurement.simulate(
        model, point, args.strategy, povm=povm, n_copies=args.n,
        n_trials=args.trials, seed=args.seed, partition=partition,
        estimator=args.estimator, threads=args.threads,
        keep_estimates=args.per_trial)
    if args.output == "csv":
        sys.stdout.write(result.to_csv(per_trial=args.per_trial))
    else:
        _emit_json(result.to_payload())
    return 0


def run_model(args):
    model, point, partition = _load_model(args)
    rho = evaluate(model, point)
    eigs = np.linalg.eigvalsh(rho)
    payload = {
        "model": model.name,
        "dim_hilbert": model.dim_hilbert,
        "dim_param": model.dim_param,
        "d_interest": partition.d_interest,
        "labels": list(model.labels),
        "point": list(point),
        "eigenvalues": [float(v) for v in eigs],
        "min_eigenvalue": float(eigs.min()),
        "trace": float(np.trace(rho).real),
    }
    (_emit_json if args.output == "json" else _emit_csv)(payload)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="qnuis",
        description="Precision bounds for quantum estimation with nuisance parameters")
    subs = parser.add_subparsers(dest="command", required=True)

    p_bound = subs.add_parser("bound", help="evaluate CR-type bounds")
    _add_model_flags(p_bound)
    p_bound.add_argument("--weight", default="identity",
                         help="'identity' or rows 'a,b;c,d'")
    p_bound.add_argument("--bounds", help="comma list from sld,rld,holevo,nagaoka")
    p_bound.set_defaults(func=run_bound)

    p_cls = subs.add_parser("classify", help="detect model classes at a point")
    _add_model_flags(p_cls)
    p_cls.add_argument("--grid", help="extra points 'a,b;c,d' for the global check")
    p_cls.set_defaults(func=run_classify)

    p_orth = subs.add_parser("orthogonalize",
                             help="integrate the orthogonalizing trajectory")
    _add_model_flags(p_orth)
    p_orth.add_argument("--start", dest="point",
                        help="starting point (first coordinate = grid start)")
    p_orth.add_argument("--grid", required=True, help="interest grid 'lo:hi:step'")
    p_orth.set_defaults(func=run_orthogonalize)

    p_sim = subs.add_parser("simulate", help="Monte-Carlo estimation strategies")
    _add_model_flags(p_sim)
    p_sim.add_argument("--strategy", choices=("repetitive", "two-step"),
                       required=True)
    p_sim.add_argument("--n", type=int, default=10000, help="copies per trial")
    p_sim.add_argument("--trials", type=int, default=200)
    p_sim.add_argument("--povm",
                       choices=("computational", "pauli6", "ic", "optimal"),
                       default=None)
    p_sim.add_argument("--estimator", choices=("lu", "mle"), default="lu")
    p_sim.add_argument("--per-trial", action="store_true",
                       help="CSV row per trial instead of the summary row")
    p_sim.set_defaults(func=run_simulate)

    p_model = subs.add_parser("model", help="validate and inspect a model spec")
    _add_model_flags(p_model)
    p_model.set_defaults(func=run_model)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except QnuisError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
