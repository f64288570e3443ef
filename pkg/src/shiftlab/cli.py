"""``shiftlab`` command-line front end.

Every subcommand reads its options from flags, falling back to the matching
table of an optional TOML config (``--config``), then to built-in defaults.
Exit codes: 0 ok, 2 bad config or arguments, 3 numerical failure, 4 I/O.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, bounds, divergence, hyptest, massart_sim, regression, sem_data, spurious_sim
from .errors import NumericalError, ParseError, ValidationError
from .seeding import derive_seed

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
SEED_ENV = "SHIFTLAB_SEED"
_GAMMA_STREAM = 7


def _floats(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",") if v.strip()]


def _strs(text):
    if isinstance(text, (list, tuple)):
        return [str(v) for v in text]
    return [v.strip() for v in str(text).split(",") if v.strip()]


def _bool(v):
    if isinstance(v, bool):
        return v
    raise ValueError(f"expected a boolean, got {v!r}")


# option name -> (converter, default); None default means "required or optional path"
OPTIONS = {
    "gen": {
        "preset": (str, "D1"), "envs": (_floats, None), "scaling": (str, "paper-text"),
        "n": (int, sem_data.DEFAULT_N), "d": (int, 20), "seed": (int, None),
        "gamma_from": (str, None), "out": (str, None),
    },
    "fit": {"data": (str, None), "method": (str, "normal-eq"), "out": (str, None)},
    "shift": {
        "kind": (str, "gaussian"), "preset": (str, "D1"), "envs": (_floats, None),
        "scaling": (str, "paper-text"), "marginal": (str, "zc"), "d": (int, 20),
        "seed": (int, None), "gamma_from": (str, None),
        "K": (int, 8), "E": (int, 9), "m": (float, 0.5), "beta": (float, 0.5),
        "out": (str, None),
    },
    "bounds": {
        "theorem": (str, "t1"), "alpha": (float, None), "beta": (float, None),
        "m": (float, None), "E": (int, None), "delta": (float, 0.05), "eps": (float, 0.0),
        "log_base": (float, None), "out": (str, None),
    },
    "massart": {
        "K": (int, 8), "E": (int, 9), "m": (float, 0.5), "beta": (float, 0.5),
        "n": (int, 10_000), "eps": (float, 0.1), "delta": (float, 0.05),
        "trials": (int, 200), "seed": (int, None), "mode": (str, "massart"),
        "x2_fraction": (float, 0.0), "shift": (float, 0.5), "workers": (int, 1),
        "betas": (_floats, None), "out": (str, None),
    },
    "colored": {
        "train_e": (_floats, [0.1, 0.5]), "test_e": (_floats, [0.1, 0.5, 0.9]),
        "n": (int, 5000), "seed": (int, None), "out": (str, None),
    },
    "sweep": {
        "e1": (float, 0.1), "grid": (_floats, None), "e_test": (float, 0.9),
        "n": (int, 5000), "trials": (int, 10), "seed": (int, None), "out": (str, None),
    },
    "hyptest": {
        "csv": (str, None), "y_col": (str, None), "x_cols": (_strs, None),
        "intercept": (_bool, True), "out": (str, None),
    },
}


# -- config ------------------------------------------------------------------

def load_config(path) -> dict:
    """Read and validate a TOML config; unknown tables or keys are rejected."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"{path}: {exc}") from None
    for table, values in raw.items():
        if table not in OPTIONS:
            raise ValidationError(f"{path}: unknown table [{table}]")
        if not isinstance(values, dict):
            raise ValidationError(f"{path}: [{table}] must be a table")
        for key, value in values.items():
            if key not in OPTIONS[table]:
                raise ValidationError(f"{path}: unknown key {key!r} in [{table}]")
            conv = OPTIONS[table][key][0]
            try:
                conv(value)
            except (TypeError, ValueError):
                raise ValidationError(f"{path}: bad value for {table}.{key}: {value!r}") from None
    return raw


def resolve(command: str, args: argparse.Namespace, config: dict) -> dict:
    table = config.get(command, {})
    opts = {}
    for key, (conv, default) in OPTIONS[command].items():
        value = getattr(args, key, None)
        if value is None:
            value = table.get(key, default)
        if value is not None:
            try:
                value = conv(value)
            except (TypeError, ValueError):
                raise ValidationError(f"bad value for {key}: {value!r}") from None
        opts[key] = value
    if "seed" in opts and opts["seed"] is None:
        opts["seed"] = int(os.environ.get(SEED_ENV, "0"))
    return opts


def _config_hash(command: str, opts: dict) -> str:
    blob = json.dumps({"command": command, **opts}, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


# -- output helpers ----------------------------------------------------------

def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        values = [r[h] for h in header] if isinstance(r, dict) else r
        w.writerow([fmt(v) for v in values])
    return buf.getvalue()


def dict_csv(rows) -> str:
    rows = list(rows)
    header = list(rows[0].keys())
    return csv_text(header, rows)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _emit(text: str, out, default_name: str) -> None:
    sys.stdout.write(text)
    if out:
        target = Path(out)
        if target.suffix != ".csv":
            target = target / default_name
        _write(target, text)


def write_manifest(command: str, opts: dict, out) -> None:
    row = {
        "command": command,
        "config_hash": _config_hash(command, opts),
        "seed": opts.get("seed", ""),
        "version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    line = ",".join(fmt(v) for v in row.values()) + "\n"
    if not out:
        sys.stderr.write("run_manifest," + line)
        return
    target = Path(out)
    directory = target.parent if target.suffix == ".csv" else target
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / "run_manifest.csv"
    new = not path.exists()
    with open(path, "a", newline="") as fh:
        if new:
            fh.write(",".join(row.keys()) + "\n")
        fh.write(line)


# -- commands ----------------------------------------------------------------

def _specs(opts):
    if opts["envs"]:
        return sem_data.env_specs(opts["envs"], opts["scaling"])
    return sem_data.preset_specs(opts["preset"], opts["scaling"])


def _gamma(opts):
    if opts["gamma_from"]:
        return sem_data.read_gamma(Path(opts["gamma_from"]) / "true_gamma.csv")
    return sem_data.make_gamma(opts["d"], derive_seed(opts["seed"], _GAMMA_STREAM))


def cmd_gen(opts):
    if not opts["out"]:
        raise ValidationError("gen needs --out")
    gamma = _gamma(opts)
    ds = sem_data.sample_dataset(gamma, _specs(opts), opts["n"], opts["seed"])
    for path in sem_data.write_dataset(ds, opts["out"]):
        print(path)


def cmd_fit(opts):
    if not opts["data"]:
        raise ValidationError("fit needs --data")
    ds = sem_data.read_dataset(opts["data"])
    weights = regression.pooled_fit(ds, opts["method"])
    summary = regression.fit_summary(weights, ds)
    row = {"method": opts["method"], "envs": " ".join(map(str, ds.env_ids)), **summary}
    text = dict_csv([row])
    sys.stdout.write(text)
    if opts["out"]:
        out = Path(opts["out"])
        _write(out / "fit_report.csv", text)
        _write(out / "weights.csv", csv_text(["0"], [[v] for v in weights.w]))


def cmd_shift(opts):
    if opts["kind"] == "gaussian":
        specs = _specs(opts)
        descs = divergence.sem_descriptors(_gamma(opts), specs, opts["marginal"])
        ids = [s.env_id for s in specs]
    elif opts["kind"] == "massart":
        fam = massart_sim.make_domains(opts["K"], opts["E"], opts["m"], opts["beta"], opts["seed"])
        descs = [divergence.MassartDescriptor(tuple(d.bayes.labels.tolist()),
                                              tuple(d.bayes.mu.tolist()), d.m)
                 for d in fam.domains]
        ids = list(range(1, len(descs) + 1))
    else:
        raise ValidationError(f"unknown shift kind {opts['kind']!r}; expected gaussian or massart")
    rep = divergence.shift_matrix(descs, ids)
    rows = [[eid] + list(rep.kl[i]) for i, eid in enumerate(rep.env_ids)]
    text = csv_text(["env_id"] + [str(e) for e in rep.env_ids], rows)
    text += f"alpha,{fmt(rep.alpha)}\n"
    if rep.beta is not None:
        text += f"beta,{fmt(rep.beta)}\n"
    _emit(text, opts["out"], "shift.csv")


def cmd_bounds(opts):
    theorem = opts["theorem"]
    if opts["E"] is None:
        raise ValidationError("bounds needs --E")
    if theorem == "t1":
        if opts["alpha"] is None:
            raise ValidationError("bounds t1 needs --alpha")
        rep = bounds.rhs_t1(opts["alpha"], opts["E"], opts["delta"])
        radius = opts["alpha"]
    elif theorem == "t2":
        if opts["beta"] is None or opts["m"] is None:
            raise ValidationError("bounds t2 needs --beta and --m")
        rep = bounds.rhs_t2(opts["beta"], opts["m"], opts["E"], opts["delta"])
        radius = bounds.massart_kl_radius(opts["beta"], opts["m"])
    else:
        raise ValidationError(f"unknown theorem {theorem!r}; expected t1 or t2")
    row = rep.as_row()
    if opts["log_base"]:
        # display only; every computation above is in nats
        row[f"kl_radius_base{opts['log_base']:g}"] = radius / math.log(opts["log_base"])
    _emit(dict_csv([row]), opts["out"], "bounds.csv")


def _massart_config(opts):
    fields = {k: opts[k] for k in ("K", "E", "m", "beta", "n", "eps", "delta", "trials",
                                   "seed", "mode", "x2_fraction", "shift", "workers")}
    return massart_sim.MassartConfig(**fields)


def cmd_massart(opts):
    cfg = _massart_config(opts)
    out = Path(opts["out"]) if opts["out"] else None
    if opts["betas"]:
        text = dict_csv(massart_sim.beta_sweep(opts["betas"], cfg))
        sys.stdout.write(text)
        if out:
            _write(out / "beta_sweep.csv", text)
        return
    res = massart_sim.run_bound_experiment(cfg)
    summary = dict_csv([res.summary()])
    sys.stdout.write(summary)
    if out:
        _write(out / "trials.csv", dict_csv(res.trials))
        _write(out / "summary.csv", summary)


def cmd_colored(opts):
    seed = opts["seed"]
    train = [spurious_sim.gen_colored_domain(e, opts["n"], derive_seed(seed, 0, i))
             for i, e in enumerate(opts["train_e"])]
    model = spurious_sim.train(train)
    rows = []
    for i, e in enumerate(opts["test_e"]):
        dom = spurious_sim.gen_colored_domain(e, opts["n"], derive_seed(seed, 1, i))
        rows.append({**spurious_sim.cf_report(model, dom), "w_shape": model.w_shape,
                     "w_color": model.w_color, "bias": model.bias})
    _emit(dict_csv(rows), opts["out"], "colored.csv")


def cmd_sweep(opts):
    rows = spurious_sim.shift_sweep(opts["e1"], opts["grid"], opts["e_test"], opts["n"],
                                    opts["trials"], opts["seed"])
    _emit(dict_csv(rows), opts["out"], "sweep.csv")


def cmd_hyptest(opts):
    if not (opts["csv"] and opts["y_col"] and opts["x_cols"]):
        raise ValidationError("hyptest needs --csv, --y-col and --x-cols")
    path = Path(opts["csv"])
    try:
        fh = open(path, newline="")
    except FileNotFoundError:
        raise ParseError(path, 0, "file not found") from None
    with fh:
        reader = csv.DictReader(fh)
        cols = [opts["y_col"]] + opts["x_cols"]
        missing = [c for c in cols if c not in (reader.fieldnames or [])]
        if missing:
            raise ValidationError(f"{path}: missing columns {missing}")
        data = []
        for lineno, row in enumerate(reader, start=2):
            try:
                data.append([float(row[c]) for c in cols])
            except (TypeError, ValueError):
                raise ParseError(path, lineno, "non-numeric value") from None
    arr = np.array(data)
    rep = hyptest.ols_ttest(arr[:, 1:], arr[:, 0], intercept=opts["intercept"],
                            names=opts["x_cols"])
    _emit(dict_csv(rep.table()), opts["out"], "hyptest.csv")


COMMANDS = {
    "gen": cmd_gen, "fit": cmd_fit, "shift": cmd_shift, "bounds": cmd_bounds,
    "massart": cmd_massart, "colored": cmd_colored, "sweep": cmd_sweep, "hyptest": cmd_hyptest,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="shiftlab", description=__doc__.splitlines()[0])
    ap.add_argument("--config", help="TOML config; flags override its values")
    ap.add_argument("--version", action="version", version=f"shiftlab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a multi-domain SEM dataset")
    p.add_argument("--preset", choices=sorted(sem_data.PRESET_ENVS))
    p.add_argument("--envs", help="comma-separated shift levels (overrides --preset)")
    p.add_argument("--scaling", choices=sem_data.SCALINGS)
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--gamma-from", dest="gamma_from", help="reuse true_gamma.csv from DIR")
    p.add_argument("--out")

    p = sub.add_parser("fit", help="pooled least-squares fit of a dataset directory")
    p.add_argument("--data")
    p.add_argument("--method", choices=["normal-eq", "gd"])
    p.add_argument("--out")

    p = sub.add_parser("shift", help="pairwise KL matrix between domains")
    p.add_argument("--kind", choices=["gaussian", "massart"])
    p.add_argument("--preset", choices=sorted(sem_data.PRESET_ENVS))
    p.add_argument("--envs")
    p.add_argument("--scaling", choices=sem_data.SCALINGS)
    p.add_argument("--marginal", choices=["zc", "diag"])
    p.add_argument("--d", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--gamma-from", dest="gamma_from")
    p.add_argument("--K", type=int)
    p.add_argument("--E", type=int)
    p.add_argument("--m", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--out")

    p = sub.add_parser("bounds", help="evaluate the clean (t1) or Massart (t2) bound")
    p.add_argument("theorem", nargs="?", choices=["t1", "t2"])
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--m", type=float)
    p.add_argument("--E", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--eps", type=float)
    p.add_argument("--log-base", dest="log_base", type=float)
    p.add_argument("--out")

    p = sub.add_parser("massart", help="Monte-Carlo bound experiment on a finite X")
    for name, typ in (("K", int), ("E", int), ("m", float), ("beta", float), ("n", int),
                      ("eps", float), ("delta", float), ("trials", int), ("seed", int),
                      ("x2-fraction", float), ("shift", float), ("workers", int)):
        p.add_argument(f"--{name}", dest=name.replace("-", "_"), type=typ)
    p.add_argument("--mode", choices=["massart", "clean"])
    p.add_argument("--betas", help="comma-separated betas: run a paired sweep instead")
    p.add_argument("--out")

    p = sub.add_parser("colored", help="factual/counterfactual accuracy of pooled ERM")
    p.add_argument("--train-e", dest="train_e")
    p.add_argument("--test-e", dest="test_e")
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")

    p = sub.add_parser("sweep", help="accuracy versus spurious-correlation shift")
    p.add_argument("--e1", type=float)
    p.add_argument("--grid")
    p.add_argument("--e-test", dest="e_test", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")

    p = sub.add_parser("hyptest", help="OLS t-tests on a CSV file")
    p.add_argument("--csv")
    p.add_argument("--y-col", dest="y_col")
    p.add_argument("--x-cols", dest="x_cols")
    p.add_argument("--no-intercept", dest="intercept", action="store_false", default=None)
    p.add_argument("--out")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config) if args.config else {}
        opts = resolve(args.command, args, config)
        COMMANDS[args.command](opts)
        write_manifest(args.command, opts, opts.get("out"))
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
