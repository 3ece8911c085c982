"""Command-line front end.

Exit codes: 0 success, 2 usage or validation error, 1 anything else.
Every command writes its resolved arguments next to its output as
``*.run.json``; ``--config FILE`` replays such a file (explicit flags win).
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bench import COMPARISON_COLUMNS, compare_methods, parse_methods
from .calibration import calibrate, calibrated_from_dict
from .data import Dataset, SplitSpec, read_csv, split_dataset, write_csv, write_table
from .evaluation import SWEEP_COLUMNS, evaluate, hk_grid_sweep
from .exceptions import LVPIError, NotCalibratedError, ValidationError
from .kernel import DEFAULT_JITTER, KernelSpec
from .models import MODEL_KINDS, fit_model, load_json, model_from_dict, save_json
from .synthetic import NoiseSpec, SyntheticSpec, generate

log = logging.getLogger("lvpi")

PI_COLUMNS = ("y_hat", "q", "lo", "hi", "clamped_lvs", "fallback_lvs")


# ------------------------------------------------------------------ helpers


def _floats(text: str, n: int | None = None) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if n is not None and len(vals) != n:
        raise argparse.ArgumentTypeError(f"expected {n} values, got {len(vals)}")
    return vals


def _int_range(text: str) -> list[int]:
    """``"3"``, ``"1-6"`` or ``"1,3,5"``."""
    out: list[int] = []
    try:
        for part in text.split(","):
            if "-" in part:
                a, b = part.split("-")
                out.extend(range(int(a), int(b) + 1))
            elif part.strip():
                out.append(int(part))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer range {text!r}")
    if not out:
        raise argparse.ArgumentTypeError("empty range")
    return out


def _split_spec(args) -> SplitSpec:
    fr = _floats(args.split, 3)
    return SplitSpec(*fr, mode=args.split_mode, seed=args.seed)


def _kernel_spec(args) -> KernelSpec | None:
    if args.model not in ("kpcr", "kpls"):
        return None
    if args.kernel_sigmas:
        return KernelSpec(
            kind="anisotropic_rbf",
            gamma2=args.kernel_gamma2,
            sigmas=tuple(_floats(args.kernel_sigmas)),
            jitter=args.kernel_jitter,
        )
    return KernelSpec(kind="rbf", sigma=args.kernel_sigma, jitter=args.kernel_jitter)


def _run_path(out: Path) -> Path:
    return out / "run.json" if out.is_dir() else out.with_name(out.stem + ".run.json")


def _write_run_config(args, out: Path) -> None:
    cfg = {
        "version": __version__,
        "command": args.command,
        "args": {k: v for k, v in vars(args).items() if k not in ("func", "config", "command")},
    }
    save_json(_run_path(out), cfg)


def _part(split_doc: dict | None, ds: Dataset, part: str | None, default: str) -> Dataset:
    """Rows of ``ds`` for a named partition of the split recorded at fit time."""
    part = part or (default if split_doc else "all")
    if part == "all":
        return ds
    if split_doc is None:
        raise ValidationError(
            f"--part {part} needs a recorded split; this model has none (use --part all)"
        )
    sp = split_dataset(ds, SplitSpec(**split_doc))
    return getattr(sp, part)


def _read_features(path: str, m: int, target: str | None) -> tuple[np.ndarray, np.ndarray | None]:
    """Feature rows from a CSV with either ``m`` columns or ``m`` plus a target."""
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh), [])
    if len(header) == m:
        if target is not None:
            raise ValidationError(f"{path}: target {target!r} given but file has only features")
        ds = read_csv(path, target=header[-1])
        return np.column_stack([ds.X, ds.y]), None
    ds = read_csv(path, target=target)
    if ds.m != m:
        raise ValidationError(f"{path}: {ds.m} feature columns, model expects {m}")
    return ds.X, ds.y


def _nan_to_none(obj):
    if isinstance(obj, dict):
        return {k: _nan_to_none(v) for k, v in obj.items()}
    if isinstance(obj, float) and math.isnan(obj):
        return None
    return obj


# ----------------------------------------------------------------- commands


def cmd_gen(args) -> None:
    noise = NoiseSpec(
        sigma_lo=args.sigma_lo,
        sigma_hi=args.sigma_hi,
        transition=args.transition,
        pivot=args.pivot,
        slope=args.slope,
    )
    spec = SyntheticSpec(
        n=args.n,
        m=args.m,
        seed=args.seed,
        latent_strengths=tuple(_floats(args.strengths, 3)),
        response_coeffs=tuple(_floats(args.coeffs, 3)),
        noise=noise,
        background_noise=args.background_noise,
        spatial_drift=args.drift,
    )
    ds, truth = generate(spec)
    out = Path(args.out)
    write_csv(out, ds, target="y")
    write_table(
        out.with_name(out.stem + ".truth.csv"),
        ["true_t1", "true_t2", "true_t3", "noise_sd"],
        np.column_stack([truth.scores, truth.noise_sd]),
    )
    _write_run_config(args, out)


def _fit(args, ds: Dataset):
    split = _split_spec(args)
    sp = split_dataset(ds, split)
    model = fit_model(
        args.model, sp.train.X, sp.train.y, args.lvs, scale=not args.no_scale, kernel=_kernel_spec(args)
    )
    prov = {
        "in": str(args.in_path),
        "target": args.target,
        "split": {
            "frac_train": split.frac_train,
            "frac_cal": split.frac_cal,
            "frac_test": split.frac_test,
            "mode": split.mode,
            "seed": split.seed,
        },
    }
    return model, prov


def cmd_fit(args) -> None:
    ds = read_csv(args.in_path, target=args.target)
    model, prov = _fit(args, ds)
    doc = model.to_dict()
    doc["provenance"] = prov
    out = Path(args.out)
    save_json(out, doc)
    _write_run_config(args, out)


def cmd_calibrate(args) -> None:
    ds = read_csv(args.in_path, target=args.target)
    if args.fitted:
        doc = load_json(args.fitted)
        model = model_from_dict(doc)
        prov = doc.get("provenance")
        if args.model_given and args.model != model.kind:
            raise ValidationError(f"--model {args.model} but {args.fitted} holds a {model.kind} model")
        if args.lvs_given and args.lvs != model.n_components:
            raise ValidationError(
                f"--lvs {args.lvs} but {args.fitted} has {model.n_components} components"
            )
    else:
        model, prov = _fit(args, ds)
    split_doc = prov.get("split") if prov else None
    cal = _part(split_doc, ds, args.part, "cal")
    cm = calibrate(model, cal.X, cal.y, args.intervals, args.alpha, rule=args.quantile_rule)
    for h, i, c in cm.table.sparse_cells:
        log.warning("LV %d interval %d has only %d calibration samples", h + 1, i + 1, c)
    doc = cm.to_dict()
    if prov:
        doc["provenance"] = prov
    out = Path(args.out)
    save_json(out, doc)
    _write_run_config(args, out)


def cmd_predict(args) -> None:
    doc = load_json(args.fitted)
    cm = calibrated_from_dict(doc)
    m = cm.model.standardizer.m
    prov = doc.get("provenance")
    split_doc = prov.get("split") if prov else None
    if (args.part or ("test" if split_doc else "all")) == "all":
        X, _ = _read_features(args.in_path, m, args.target)
    else:
        X = _part(split_doc, read_csv(args.in_path, target=args.target), args.part, "test").X
    pis = cm.predict_with_pi(X)
    out = Path(args.out)
    with out.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PI_COLUMNS)
        for r in pis:
            w.writerow(
                [
                    repr(r.y_hat),
                    repr(r.q),
                    repr(r.lo),
                    repr(r.hi),
                    ";".join(map(str, r.clamped_lvs)),
                    ";".join(map(str, r.fallback_lvs)),
                ]
            )
    _write_run_config(args, out)


def _read_predictions(path: str) -> dict[str, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValidationError(f"{path}: no prediction rows")
    missing = {"y_hat", "q", "lo", "hi"} - set(rows[0])
    if missing:
        raise ValidationError(f"{path}: missing columns {sorted(missing)}")
    try:
        return {c: np.array([float(r[c]) for r in rows]) for c in ("y_hat", "q", "lo", "hi")}
    except ValueError as exc:
        raise ValidationError(f"{path}: {exc}") from None


def cmd_evaluate(args) -> None:
    pred = _read_predictions(args.pred)
    ds = read_csv(args.in_path, target=args.target)
    split_doc = None
    if args.fitted:
        prov = load_json(args.fitted).get("provenance")
        split_doc = prov.get("split") if prov else None
    test = _part(split_doc, ds, args.part, "test")
    if test.n != pred["lo"].shape[0]:
        raise ValidationError(
            f"{args.pred} has {pred['lo'].shape[0]} rows but the test data has {test.n}"
        )
    report = evaluate(test.y, (pred["lo"], pred["hi"]), y_hat=pred["y_hat"])
    out = Path(args.out)
    d = report.to_dict()
    save_json(out.with_suffix(".json"), _nan_to_none(d))
    with out.with_suffix(".csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(d))
        w.writerow([d[k] for k in d])
    _write_run_config(args, out.with_suffix(".json"))


def _bench_data(args) -> Dataset:
    if args.in_path:
        return read_csv(args.in_path, target=args.target)
    spec = SyntheticSpec(n=args.n, m=args.m, seed=args.gen_seed)
    return generate(spec)[0]


def _write_rows(path: Path, columns, rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n", extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow(r)


def _comparison(args, ds):
    sp = split_dataset(ds, _split_spec(args))
    results = compare_methods(
        sp,
        kind=args.model,
        H=args.lvs,
        k=args.intervals,
        alpha=args.alpha,
        B_residual=args.B,
        B_pairs=args.pairs_B,
        seed=args.seed,
        methods=parse_methods(args.methods),
        rule=args.quantile_rule,
        scale=not args.no_scale,
        kernel=_kernel_spec(args),
        threads=args.threads,
    )
    return sp, results


def cmd_compare(args) -> None:
    ds = _bench_data(args)
    _, results = _comparison(args, ds)
    out = Path(args.out)
    _write_rows(out, COMPARISON_COLUMNS, [r.row() for r in results])
    _write_run_config(args, out)


def cmd_bench(args) -> None:
    ds = _bench_data(args)
    sp, results = _comparison(args, ds)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_rows(out / "methods.csv", COMPARISON_COLUMNS, [r.row() for r in results])
    summary = {"methods": {r.method: r.report.to_dict() for r in results}}
    if args.sweep_lvs or args.sweep_intervals:
        rows = hk_grid_sweep(
            sp,
            args.model,
            args.sweep_lvs or [args.lvs],
            args.sweep_intervals or [args.intervals],
            alpha=args.alpha,
            scale=not args.no_scale,
            kernel=_kernel_spec(args),
            rule=args.quantile_rule,
            threads=args.threads,
        )
        _write_rows(out / "hk_sweep.csv", SWEEP_COLUMNS, rows)
        summary["hk_sweep_cells"] = len(rows)
    save_json(out / "summary.json", _nan_to_none(summary))
    _write_run_config(args, out)


# ------------------------------------------------------------------- parser


class _Tracked(argparse.Action):
    """Store the value and remember that the flag was given explicitly."""

    def __call__(self, parser, ns, values, option_string=None):
        setattr(ns, self.dest, values)
        setattr(ns, self.dest + "_given", True)


def _data_flags(p, split_default="0.4,0.4,0.2", mode_default="random", required=True):
    p.add_argument("--in", dest="in_path", required=required, help="input CSV")
    p.add_argument("--target", default=None, help="response column (default: last)")
    p.add_argument("--split", default=split_default, help="train,cal,test fractions")
    p.add_argument("--split-mode", default=mode_default, choices=["random", "contiguous"])
    p.add_argument("--seed", type=int, default=0)


def _model_flags(p, lvs_default=3):
    p.add_argument("--model", default="pcr", choices=MODEL_KINDS, action=_Tracked)
    p.add_argument("--lvs", type=int, default=lvs_default, action=_Tracked, help="number of latent variables H")
    p.add_argument("--no-scale", action="store_true", help="center only, no variance scaling")
    p.add_argument("--kernel-sigma", type=float, default=1.0)
    p.add_argument("--kernel-jitter", type=float, default=DEFAULT_JITTER)
    p.add_argument("--kernel-gamma2", type=float, default=1.0)
    p.add_argument("--kernel-sigmas", default=None, help="comma list: anisotropic length-scales")
    p.set_defaults(model_given=False, lvs_given=False)


def _calib_flags(p, k_default=5):
    p.add_argument("--intervals", type=int, default=k_default, help="LV intervals per LV (k)")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--quantile-rule", default="higher", choices=["higher", "conformal"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lvpi", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    parser.subcommands = {}

    def add(name, func, help):
        p = sub.add_parser(name, help=help)
        parser.subcommands[name] = p
        p.add_argument("--config", default=None, help="replay arguments from a *.run.json file")
        p.add_argument("--threads", type=int, default=1, help="worker cap (results do not depend on it)")
        p.set_defaults(func=func)
        return p

    p = add("gen", cmd_gen, "write a semi-synthetic heteroscedastic dataset")
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--m", type=int, default=66)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--strengths", default="0.85,0.10,0.05")
    p.add_argument("--coeffs", default="-0.9,0.3,-0.2")
    p.add_argument("--sigma-lo", type=float, default=0.05)
    p.add_argument("--sigma-hi", type=float, default=0.5)
    p.add_argument("--transition", default="piecewise_linear", choices=["piecewise_linear", "logistic"])
    p.add_argument("--pivot", type=float, default=0.0)
    p.add_argument("--slope", type=float, default=2.0)
    p.add_argument("--background-noise", type=float, default=0.01)
    p.add_argument("--drift", type=float, default=0.9, help="spatial drift of the first latent score")

    p = add("fit", cmd_fit, "fit a latent-variable regressor on the training part")
    _data_flags(p)
    _model_flags(p)
    p.add_argument("--out", required=True)

    p = add("calibrate", cmd_calibrate, "build the LV-interval quantile table")
    _data_flags(p)
    _model_flags(p)
    _calib_flags(p)
    p.add_argument("--fitted", default=None, help="model JSON from `fit` (otherwise fit first)")
    p.add_argument("--part", default=None, choices=["train", "cal", "test", "all"])
    p.add_argument("--out", required=True)

    p = add("predict", cmd_predict, "write prediction intervals as CSV")
    p.add_argument("--fitted", required=True, help="calibrated model JSON")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--target", default=None)
    p.add_argument("--part", default=None, choices=["train", "cal", "test", "all"])
    p.add_argument("--out", required=True)

    p = add("evaluate", cmd_evaluate, "coverage / width / exceedance / correlation report")
    p.add_argument("--pred", required=True, help="CSV written by `predict`")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--target", default=None)
    p.add_argument("--fitted", default=None, help="model JSON whose recorded split selects the rows")
    p.add_argument("--part", default=None, choices=["train", "cal", "test", "all"])
    p.add_argument("--out", required=True, help="report path stem (.json and .csv written)")

    for name, func, help in (
        ("bench", cmd_bench, "method comparison plus optional H x k sweep"),
        ("compare-baselines", cmd_compare, "one CSV row per interval method"),
    ):
        p = add(name, func, help)
        _data_flags(p, "0.5,0.25,0.25", "contiguous", required=False)
        _model_flags(p)
        _calib_flags(p)
        p.add_argument("--n", type=int, default=10_000, help="generated rows when --in is absent")
        p.add_argument("--m", type=int, default=66)
        p.add_argument("--gen-seed", type=int, default=0)
        p.add_argument("--B", type=int, default=1000, help="residual bootstrap replicates")
        p.add_argument("--pairs-B", type=int, default=200, help="pairs bootstrap replicates")
        p.add_argument("--methods", default=None, help="comma list: lv,conformal,residual,pairs")
        p.add_argument("--out", required=True)
        if name == "bench":
            p.add_argument("--sweep-lvs", type=_int_range, default=None, help="e.g. 1-6")
            p.add_argument("--sweep-intervals", type=_int_range, default=None, help="e.g. 1-10")
    return parser


def _config_arg(argv) -> str | None:
    for i, a in enumerate(argv):
        if a == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if a.startswith("--config="):
            return a.split("=", 1)[1]
    return None


def _load_config(parser, path: str) -> str:
    """Install a saved run's arguments as defaults of its subcommand."""
    cfg = load_json(path)
    command = cfg.get("command")
    if command not in parser.subcommands:
        raise ValidationError(f"{path}: unknown command {command!r}")
    sub = parser.subcommands[command]
    sub.set_defaults(**cfg["args"])
    for action in sub._actions:
        action.required = False
    return command


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    cfg_command = None
    cfg_path = _config_arg(argv)
    if cfg_path:
        try:
            cfg_command = _load_config(parser, cfg_path)
        except (ValidationError, OSError) as exc:
            print(f"lvpi: error: {exc}", file=sys.stderr)
            return 2
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s: %(message)s"
    )
    if cfg_command is not None and cfg_command != args.command:
        print(f"lvpi: error: {cfg_path} is a {cfg_command!r} config", file=sys.stderr)
        return 2
    try:
        args.func(args)
    except (ValidationError, NotCalibratedError, FileNotFoundError) as exc:
        print(f"lvpi {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except LVPIError as exc:
        print(f"lvpi {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
