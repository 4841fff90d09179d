"""Command-line pipeline: ground, infer, learn, eval.

    hlmrf infer --model trust.hlm --data data/ --out results/

Outputs are tab-separated with six fractional digits, so repeated runs
with the same flags and seed are byte-identical.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .admm import AdmmConfig, mpe_infer
from .errors import DataError, HlmrfError
from .grounding import ground_constraints, ground_model, load_database
from .likelihood import MpleConfig, PerceptronConfig, mle_train, mple_train
from .margin import LmeConfig, lme_train
from .metrics import MetricReport, auc_pr, auc_roc, categorical_accuracy, regression_errors
from .modelfile import parse_model_file

__all__ = ["run_pipeline", "main"]


def _fmt(value: float) -> str:
    return f"{value:.6f}"


def _write_tsv(path: Path, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write("\t".join(str(c) for c in row) + "\n")


def _load_parsed(model_path):
    text = Path(model_path).read_text(encoding="utf-8")
    return parse_model_file(text)


def _read_atom_values(path: Path, predicates):
    values = {}
    preds = {p.name: p for p in predicates}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            cols = [c.strip() for c in line.split("\t")]
            name = cols[0]
            if name not in preds:
                raise DataError(f"{path}:{lineno}: undeclared predicate {name}")
            if len(cols) != preds[name].arity + 2:
                raise DataError(f"{path}:{lineno}: wrong column count")
            values[(name, tuple(cols[1:-1]))] = float(cols[-1])
    return values


def _truth_vector(db, values, source):
    truth = np.zeros(db.num_variables)
    for key, idx in db.targets.items():
        if key not in values:
            raise DataError(f"{source} is missing a value for {key[0]}{key[1]}")
        truth[idx] = values[key]
    return truth


def _constraint_groups(parsed, db):
    groups = []
    for c in ground_constraints(parsed.constraint_specs, db):
        groups.append([int(i) for i in c.func.indices])
    return groups


def _cmd_ground(parsed, db, model, out_dir):
    rows = [("template", i, count) for i, count in enumerate(model.grounding_counts)]
    rows.append(("constraints", "-", len(model.constraints)))
    rows.append(("variables", "-", model.num_variables))
    _write_tsv(out_dir / "ground_summary.tsv", rows)
    return 0


def _read_weights_file(path, template_count):
    weights = np.full(template_count, np.nan)
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            if not raw.strip() or raw.lstrip().startswith("#"):
                continue
            idx, value = raw.split("\t")
            weights[int(idx)] = float(value)
    if np.isnan(weights).any():
        raise DataError(f"{path} does not cover every template")
    return weights


def _cmd_infer(parsed, db, model, out_dir, args):
    if args.weights:
        weights = _read_weights_file(Path(args.weights), model.template_count)
    else:
        weights = parsed.weights
    config = AdmmConfig(
        rho=args.rho,
        max_iterations=args.max_iters,
        deterministic=args.deterministic,
    )
    assignment, _, diag = mpe_infer(model, weights, config)
    rows = []
    for (name, atom_args) in db.target_atoms:
        idx = db.targets[(name, atom_args)]
        rows.append((name, *atom_args, _fmt(assignment[idx])))
    _write_tsv(out_dir / "inferred.tsv", rows)
    _write_diagnostics(out_dir, diag)
    if not diag.converged:
        print("warning: inference did not converge within the iteration budget",
              file=sys.stderr)
    return 0


def _write_diagnostics(out_dir, diag, extra=()):
    rows = [
        ("converged", int(diag.converged)),
        ("iterations", diag.iterations),
        ("primal_residual", _fmt(diag.primal_residual)),
        ("dual_residual", _fmt(diag.dual_residual)),
        ("energy", _fmt(diag.energy)),
    ]
    rows.extend(extra)
    _write_tsv(out_dir / "diagnostics.tsv", rows)


def _cmd_learn(parsed, db, model, out_dir, args):
    truth_path = Path(args.data) / "truth.tsv"
    if not truth_path.exists():
        raise DataError(f"learning requires {truth_path}")
    truth = _truth_vector(db, _read_atom_values(truth_path, parsed.predicates), truth_path)
    infer_config = AdmmConfig(
        rho=args.rho,
        max_iterations=args.max_iters,
        deterministic=args.deterministic,
    )
    learnable = parsed.learnable or None
    if args.method == "mle":
        weights = mle_train(
            model, truth, PerceptronConfig(), infer_config,
            initial_weights=parsed.weights, learnable=learnable,
        )
    elif args.method == "mple":
        weights = mple_train(
            model, truth, PerceptronConfig(), MpleConfig(seed=args.seed),
            initial_weights=parsed.weights, learnable=learnable,
        )
    else:
        weights, diag = lme_train(
            model, truth, LmeConfig(), infer_config,
            initial_weights=parsed.weights, learnable=learnable,
        )
        if not diag.converged:
            print("warning: cutting-plane training hit the oracle-call limit",
                  file=sys.stderr)
    rows = [(i, _fmt(w)) for i, w in enumerate(weights)]
    _write_tsv(out_dir / "weights.tsv", rows)
    return 0


def _cmd_eval(parsed, db, model, out_dir, args):
    pred_path = Path(args.predictions) if args.predictions else out_dir / "inferred.tsv"
    truth_path = Path(args.data) / "truth.tsv"
    for path in (pred_path, truth_path):
        if not path.exists():
            raise DataError(f"eval requires {path}")
    pred_vals = _read_atom_values(pred_path, parsed.predicates)
    truth_vals = _read_atom_values(truth_path, parsed.predicates)
    predictions = _truth_vector(db, pred_vals, pred_path)
    truth = _truth_vector(db, truth_vals, truth_path)

    report = MetricReport()
    report.mse, report.mae = regression_errors(predictions, truth)
    groups = _constraint_groups(parsed, db)
    if groups:
        report.accuracy = categorical_accuracy(predictions, truth, groups)
    is_binary = np.all((truth == 0.0) | (truth == 1.0))
    if is_binary and 0 < truth.sum() < truth.size:
        report.auc_roc = auc_roc(predictions, truth.astype(int))
        report.auc_pr_positive = auc_pr(predictions, truth.astype(int), positive_class=1)
        report.auc_pr_negative = auc_pr(predictions, truth.astype(int), positive_class=0)
    _write_tsv(out_dir / "metrics.tsv", [(k, _fmt(v)) for k, v in report.rows()])
    return 0


def run_pipeline(command, model_path, data_dir, **flags) -> int:
    """Programmatic entry point mirroring the command line; returns the
    exit status and writes the command's output files."""
    argv = [command, "--model", str(model_path), "--data", str(data_dir)]
    for key, value in flags.items():
        flag = "--" + key.replace("_", "-")
        if isinstance(value, bool):
            if value:
                argv.append(flag)
        elif value is not None:
            argv.extend([flag, str(value)])
    return main(argv)


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="hlmrf",
        description="Ground, solve and train hinge-loss rule models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("ground", "infer", "learn", "eval"):
        sp = sub.add_parser(name)
        sp.add_argument("--model", required=True, help="model file")
        sp.add_argument("--data", required=True, help="data directory")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--rho", type=float, default=1.0)
        sp.add_argument("--max-iters", type=int, default=25000)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--deterministic", action="store_true")
        if name == "learn":
            sp.add_argument("--method", choices=("mle", "mple", "lme"), default="mle")
        if name == "infer":
            sp.add_argument("--weights", default=None, help="weights.tsv from learn")
        if name == "eval":
            sp.add_argument("--predictions", default=None,
                            help="predictions file (default: <out>/inferred.tsv)")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    out_dir = Path(args.out)
    try:
        parsed = _load_parsed(args.model)
        db = load_database(parsed.predicates, args.data)
        model = ground_model(parsed.templates, parsed.constraint_specs, db)
        if args.command == "ground":
            return _cmd_ground(parsed, db, model, out_dir)
        if args.command == "infer":
            return _cmd_infer(parsed, db, model, out_dir, args)
        if args.command == "learn":
            return _cmd_learn(parsed, db, model, out_dir, args)
        return _cmd_eval(parsed, db, model, out_dir, args)
    except (HlmrfError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
