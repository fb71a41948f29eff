"""Command-line interface: ``sparsefs {synth,mask,select,eval}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import _accel
from ._rng import derive_seed
from .datamodel import inject_missing, load_csv, write_csv
from .errors import DataError, SparseFSError, ValidationError
from .evaluation import CSV_COLUMNS, cross_validate, run_ablation
from .lfa import LfaConfig
from .selector import SelectorConfig, run_selection
from .synthetic import make_synthetic
from .threeway import CostMatrix, SaParams

log = logging.getLogger("sparsefs")

# flag dest -> (config path, default); None defaults in argparse let us tell
# explicit flags apart from config-file values
SELECTOR_FLAGS = {
    "mu": (("mu",), 0.05),
    "lam": (("lfa", "lam"), 0.01),
    "eta": (("lfa", "eta"), 0.01),
    "h": (("lfa", "h"), 10),
    "epochs": (("lfa", "max_epochs"), 1000),
    "tol": (("lfa", "tol"), 1e-4),
    "min_epochs": (("lfa", "min_epochs"), 50),
    "buffer": (("buffer_len",), 5),
    "costs": (("costs",), "0,1,10,10,1,0"),
    "init_t": (("sa", "init_t"), 1.0),
    "min_t": (("sa", "min_t"), 1e-3),
    "delta": (("sa", "delta"), 0.95),
    "k": (("sa", "k"), 1.0),
    "step_sigma": (("sa", "step_sigma"), 0.05),
    "chain": (("sa", "chain"), 20),
    "max_cond": (("max_cond_size",), 3),
    "mode": (("mode",), "three_way"),
    "reanneal_every": (("reanneal_every",), 1),
    "weak_rule": (("weak_rule",), "subsets"),
    "warm_start": (("warm_start",), False),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_common(p):
    p.add_argument("--out-dir", default=".", help="output directory (default: current directory)")
    p.add_argument("--seed", type=int, default=None, help="master seed for every random stream (default: 0)")
    p.add_argument("--config", help="JSON config file; explicit flags override its values")
    p.add_argument("-v", "--verbose", action="store_true")


def _add_input(p):
    p.add_argument("--input", required=True, help="CSV file, class label in the last column")
    p.add_argument("--missing-token", default="NA", help="cell value meaning 'missing' (default: NA)")
    p.add_argument("--label-col", type=int, default=-1, help="label column index (default: -1, the last)")
    p.add_argument("--dataset", default=None, help="dataset name used in reports (default: input file stem)")


def _add_selector(p):
    g = p.add_argument_group("selector")
    g.add_argument("--mu", type=float, help="significance level of the Fisher Z test (default: 0.05)")
    g.add_argument("--zeta", type=float, default=None, help="fraction of cells hidden before selection (default: 0.1)")
    g.add_argument("--lambda", dest="lam", type=float, help="LFA L2 regularisation (default: 0.01)")
    g.add_argument("--eta", type=float, help="LFA learning rate (default: 0.01)")
    g.add_argument("--h", type=int, help="LFA latent dimension, clamped to min(h, N, L) (default: 10)")
    g.add_argument("--epochs", type=int, help="LFA maximum epochs (default: 1000)")
    g.add_argument("--tol", type=float, help="LFA stop when RMSE improves less than this (default: 1e-4)")
    g.add_argument("--min-epochs", type=int, help="LFA epochs before the tol rule applies (default: 50)")
    g.add_argument("--buffer", type=int, help="columns per completion buffer L (default: 5)")
    g.add_argument("--costs", help="r_pp,r_bp,r_ep,r_pe,r_be,r_ee (default: 0,1,10,10,1,0)")
    g.add_argument("--init-t", type=float, help="annealing start temperature (default: 1.0)")
    g.add_argument("--min-t", type=float, help="annealing stop temperature (default: 1e-3)")
    g.add_argument("--delta", type=float, help="cooling factor (default: 0.95)")
    g.add_argument("--k", type=float, help="Boltzmann scale (default: 1.0)")
    g.add_argument("--step-sigma", type=float, help="threshold proposal spread (default: 0.05)")
    g.add_argument("--chain", type=int, help="proposals per temperature level (default: 20)")
    g.add_argument("--max-cond", type=int, help="largest conditioning set in redundancy tests (default: 3)")
    g.add_argument("--mode", choices=["three_way", "two_way"], help="relevance partition (default: three_way)")
    g.add_argument("--reanneal-every", type=int, help="re-optimise thresholds every k features (default: 1)")
    g.add_argument("--weak-rule", choices=["subsets", "singleton"], help="weak-feature test scope (default: subsets)")
    g.add_argument("--warm-start", action="store_true", default=None, help="start annealing from the previous thresholds")


def build_parser():
    parser = _Parser(prog="sparsefs", description="Online feature selection over sparse streaming features.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a planted dataset")
    _add_common(p)
    p.add_argument("--n", type=int, default=500, help="instances (default: 500)")
    p.add_argument("--d", type=int, default=100, help="features (default: 100)")
    p.add_argument("--relevant", type=int, default=5, help="relevant features (default: 5)")
    p.add_argument("--duplicates", type=int, default=0, help="near-copies of relevant features (default: 0)")
    p.add_argument("--noise-sigma", type=float, default=0.5, help="label noise scale (default: 0.5)")
    p.add_argument("--jitter", type=float, default=1e-3, help="duplicate jitter scale (default: 1e-3)")
    p.add_argument("--classes", type=int, default=2, help="number of classes (default: 2)")

    p = sub.add_parser("mask", help="hide a fraction of cells, write CSV with NA")
    _add_common(p)
    _add_input(p)
    p.add_argument("--zeta", type=float, default=0.1, help="fraction of cells hidden (default: 0.1)")

    p = sub.add_parser("select", help="run online feature selection over the columns")
    _add_common(p)
    _add_input(p)
    _add_selector(p)

    p = sub.add_parser("eval", help="cross-validated KNN accuracy of the selection")
    _add_common(p)
    _add_input(p)
    _add_selector(p)
    p.add_argument("--folds", type=int, default=None, help="cross-validation folds (default: 5)")
    p.add_argument("--repeats", type=int, default=None, help="repetitions (default: 10)")
    p.add_argument("--knn-k", type=int, default=None, help="KNN neighbours (default: 3)")
    p.add_argument("--ablation", action="store_true", default=None, help="also run the two-way ablation")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for folds (default: 1)")
    return parser


def _set(d, path, value):
    for key in path[:-1]:
        d = d.setdefault(key, {})
    d[path[-1]] = value


def _get(d, path):
    for key in path:
        if not isinstance(d, dict) or key not in d:
            return None
        d = d[key]
    return d


def _load_config(args):
    if not args.config:
        return {}
    path = Path(args.config)
    if not path.exists():
        raise DataError(f"{path}: no such config file")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from None


def _pick(args, name, file_cfg, path, default):
    value = getattr(args, name, None)
    if value is not None:
        return value
    value = _get(file_cfg, path)
    return default if value is None else value


def resolve_selector(args, file_cfg) -> SelectorConfig:
    sel_file = file_cfg.get("selector", {})
    raw = {}
    for name, (path, default) in SELECTOR_FLAGS.items():
        _set(raw, path, _pick(args, name, sel_file, path, default))
    costs = raw["costs"]
    if isinstance(costs, str):
        try:
            costs = [float(c) for c in costs.split(",")]
        except ValueError:
            raise ValidationError(f"--costs must be six comma-separated numbers, got {raw['costs']!r}") from None
    seed = _pick(args, "seed", file_cfg, ("seed",), 0)
    return SelectorConfig(
        mu=float(raw["mu"]),
        lfa=LfaConfig(**raw["lfa"]),
        buffer_len=int(raw["buffer_len"]),
        costs=CostMatrix.from_sequence(costs),
        sa=SaParams(**raw["sa"]),
        max_cond_size=int(raw["max_cond_size"]),
        seed=int(seed),
        mode=raw["mode"],
        warm_start=bool(raw["warm_start"]),
        reanneal_every=int(raw["reanneal_every"]),
        weak_rule=raw["weak_rule"],
    )


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"{out}: cannot create output directory ({exc})") from None
    return out


def _load_input(args):
    table, labels, header = load_csv(args.input, args.missing_token, args.label_col)
    return table, labels, header


def cmd_synth(args):
    file_cfg = _load_config(args)
    seed = _pick(args, "seed", file_cfg, ("seed",), 0)
    X, y, truth = make_synthetic(
        args.n, args.d, args.relevant, args.duplicates, args.noise_sigma, seed, args.jitter, args.classes
    )
    out = _out_dir(args)
    write_csv(out / "data.csv", X, y)
    _write_json(out / "truth.json", truth.to_dict())
    _write_json(
        out / "config.resolved.json",
        {
            "command": "synth",
            "seed": seed,
            "n": args.n,
            "d": args.d,
            "relevant": args.relevant,
            "duplicates": args.duplicates,
            "noise_sigma": args.noise_sigma,
            "jitter": args.jitter,
            "classes": args.classes,
        },
    )
    print(json.dumps(truth.to_dict()))
    return 0


def cmd_mask(args):
    file_cfg = _load_config(args)
    seed = _pick(args, "seed", file_cfg, ("seed",), 0)
    table, labels, header = _load_input(args)
    buf = inject_missing(table, args.zeta, derive_seed(seed, "mask"))
    out = _out_dir(args)
    write_csv(out / "masked.csv", buf.values, labels, header)
    _write_json(
        out / "config.resolved.json",
        {"command": "mask", "seed": seed, "zeta": args.zeta, "input": str(args.input), "missing": int((~buf.mask).sum())},
    )
    return 0


def _resolved(args, cfg, zeta, extra=None):
    d = {
        "command": args.command,
        "input": str(args.input),
        "missing_token": args.missing_token,
        "label_col": args.label_col,
        "zeta": zeta,
        "seed": cfg.seed,
        "selector": cfg.to_dict(),
        "backend": _accel.backend(),
    }
    d.update(extra or {})
    return d


def cmd_select(args):
    file_cfg = _load_config(args)
    cfg = resolve_selector(args, file_cfg)
    zeta = float(_pick(args, "zeta", file_cfg, ("zeta",), 0.1))
    table, labels, _ = _load_input(args)
    out = _out_dir(args)
    _write_json(out / "config.resolved.json", _resolved(args, cfg, zeta))
    _, result = run_selection(table, labels, cfg, zeta)
    _write_json(out / "selection.json", result.to_dict())
    with open(out / "steps.jsonl", "w") as fh:
        for step in result.steps:
            fh.write(json.dumps(step, sort_keys=True) + "\n")
    print(json.dumps({"selected": result.selected, "deferred": result.deferred}))
    return 0


def cmd_eval(args):
    file_cfg = _load_config(args)
    cfg = resolve_selector(args, file_cfg)
    zeta = float(_pick(args, "zeta", file_cfg, ("zeta",), 0.1))
    folds = int(_pick(args, "folds", file_cfg, ("folds",), 5))
    repeats = int(_pick(args, "repeats", file_cfg, ("repeats",), 10))
    knn_k = int(_pick(args, "knn_k", file_cfg, ("knn_k",), 3))
    ablation = bool(_pick(args, "ablation", file_cfg, ("ablation",), False))
    table, labels, _ = _load_input(args)
    if np.isnan(table).any():
        raise DataError("eval needs a fully observed table; missingness is injected per training fold")
    dataset = args.dataset or Path(args.input).stem
    out = _out_dir(args)
    _write_json(
        out / "config.resolved.json",
        _resolved(args, cfg, zeta, {"folds": folds, "repeats": repeats, "knn_k": knn_k, "ablation": ablation}),
    )
    kwargs = dict(folds=folds, repeats=repeats, zeta=zeta, knn_k=knn_k, jobs=args.jobs)
    if ablation:
        reports = dict(zip(("three_way", "two_way"), run_ablation(table, labels, cfg, seed=cfg.seed, **kwargs)))
    else:
        reports = {cfg.mode: cross_validate(table, labels, cfg, seed=cfg.seed, **kwargs)}
    rows = [",".join(CSV_COLUMNS)]
    for name, rep in reports.items():
        fname = "report.json" if not ablation else f"report_{name}.json"
        _write_json(out / fname, rep.to_dict())
        rows.append(rep.csv_row(dataset))
        print(f"{name}: mean_acc={rep.mean_accuracy:.4f} std={rep.std_accuracy:.4f} "
              f"mean_selected={rep.mean_selected:.2f} runtime={rep.runtime_seconds:.2f}s")
    (out / "report.csv").write_text("\n".join(rows) + "\n")
    return 0


COMMANDS = {"synth": cmd_synth, "mask": cmd_mask, "select": cmd_select, "eval": cmd_eval}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except SparseFSError as exc:
        print(f"sparsefs {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"sparsefs {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
