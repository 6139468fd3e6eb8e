"""Command-line entry point: ``flowoct --data monk1 --depth 2 --lambda 0``."""
from __future__ import annotations

import argparse
import sys
from fractions import Fraction

from .dataset_io import DatasetError, SplitSpec
from .formulations import FAMILIES, FormulationConfig, build
from .harness import DEFAULT_GRID, RunSpec, lambda_sweep, load_data, result_document, train


def _grid(text: str) -> tuple:
    try:
        vals = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad lambda grid {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("lambda grid is empty")
    return vals


def _split(text: str) -> tuple:
    try:
        parts = tuple(Fraction(v) for v in text.split(","))
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"bad split {text!r}")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("split needs three fractions, e.g. 1/2,1/4,1/4")
    return parts


def parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="flowoct", description="Train optimal binary classification trees.")
    p.add_argument("--data", required=True, help="CSV path or a built-in name (monk1, monk2, monk3, balance-scale)")
    p.add_argument("--label", help="label column (default: last column)")
    p.add_argument("--formulation", choices=FAMILIES, default="flowoct")
    p.add_argument("--depth", type=int, default=2)
    lam = p.add_mutually_exclusive_group()
    lam.add_argument("--lambda", dest="lam", type=float, default=0.0, help="regularization weight in [0, 1]")
    lam.add_argument("--lambda-grid", nargs="?", type=_grid, const=DEFAULT_GRID,
                     help="select lambda on a validation split (default grid 0.0,0.1,...,0.9)")
    p.add_argument("--time-limit", type=float, default=60.0, help="seconds per solve")
    p.add_argument("--seed", type=int, default=0, help="seed of the train/validation/test split")
    p.add_argument("--split", type=_split,
                   help="train,validation,test fractions; with --lambda the default is to train on all rows")
    p.add_argument("--multi-cuts", action="store_true", help="add multi-point cuts at the bottom layer")
    p.add_argument("--lp", choices=("auto", "simplex", "highs"), default="auto", help="LP engine")
    p.add_argument("--export-lp", metavar="PATH", help="write the model in LP format and exit")
    p.add_argument("--log", metavar="PATH", help="branch-and-bound node log (NDJSON)")
    p.add_argument("--out", metavar="PATH", help="result document (default: stdout)")
    return p


def main(argv=None) -> int:
    p = parser()
    a = p.parse_args(argv)
    try:
        split = None if a.split is None else SplitSpec(*a.split, a.seed)
        spec = RunSpec(a.data, a.label, a.formulation, a.depth, a.lam, a.lambda_grid,
                       a.time_limit, a.seed, split, a.multi_cuts, a.lp, a.out, a.log)
        if a.export_lp:
            ds = load_data(a.data, a.label)
            model = build(ds, FormulationConfig(a.depth, a.lam, a.formulation, a.multi_cuts))
            model.export_lp(a.export_lp)
            print(f"wrote {a.export_lp}: {model.n_vars} variables, {model.n_rows} rows")
            return 0
        res = lambda_sweep(spec) if spec.lambda_grid is not None else train(spec)
    except (DatasetError, ValueError, OSError) as e:
        print(f"flowoct: error: {e}", file=sys.stderr)
        return 2
    doc = result_document(res, spec)
    if a.out:
        with open(a.out, "w") as fh:
            fh.write(doc)
    else:
        sys.stdout.write(doc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
