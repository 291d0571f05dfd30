"""Command-line entry point: ``grasscap {bounds,ddt,capacity,faces}``.

Every subcommand writes a single CSV file.  It opens with ``#@ key=value``
lines recording every parameter that affects the output, so passing the file
back through ``--config`` reproduces it byte for byte.  Config files use the
same flat ``key=value`` form (``#`` starts a comment); command-line flags
override config values, and ``GRASSCAP_SEED`` overrides the config seed.

Grids are comma lists (``0.1,0.01``) or ``logspace:START:STOP:COUNT`` with
base-10 exponents, so ``logspace:-1:-4:8`` is 8 points from 1e-1 to 1e-4.

Exit status: 0 on success, 2 on invalid input, 1 on runtime failure.
"""
from __future__ import annotations

import argparse
import io
import logging
import os
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .bounds import DdtCurve, DdtKind, c_affine_bounds, c_linear_bounds, ddt_eval
from .ensemble import ScalingParams
from .experiments import (
    InsufficientDataError,
    SweepConfig,
    SweepRow,
    fit_slope,
    run_capacity_sweep,
    run_ddt_sweep,
    usable_for_slope,
)

log = logging.getLogger("grasscap")

SEED_ENV = "GRASSCAP_SEED"


class UsageError(Exception):
    """Invalid user input; reported with exit status 2."""


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def parse_grid(text: str, cast: Callable = float) -> List:
    text = text.strip()
    if text.startswith("logspace:"):
        try:
            _, start, stop, count = text.split(":")
            values = np.logspace(float(start), float(stop), int(count))
        except ValueError as exc:
            raise ValueError(f"bad logspace grid {text!r}; expected logspace:START:STOP:COUNT") from exc
        return [cast(float(v)) for v in values]
    if not text:
        return []
    return [cast(v) for v in text.split(",") if v.strip()]


def parse_config(text: str, source: str = "<config>") -> Dict[str, str]:
    """Parse ``key=value`` lines; a file holding ``#@`` header lines contributes only those."""
    lines = text.splitlines()
    header_only = any(line.startswith("#@") for line in lines)
    out: Dict[str, str] = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if header_only:
            if not line.startswith("#@"):
                continue
            line = line[2:].strip()
        elif not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{source}:{lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise UsageError(f"{source}:{lineno}: empty key")
        out[key.replace("-", "_")] = value
    return out


# per-subcommand option table: name -> (parser, default, help)
_Options = Dict[str, tuple]

_INT = int
_FLOAT = float


def _float_grid(s):
    return parse_grid(s, float)


def _int_grid(s):
    return parse_grid(s, int)


def _bool(s):
    if isinstance(s, bool):
        return s
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


OPTIONS: Dict[str, _Options] = {
    "bounds": {
        "kappa": (_FLOAT, "0.5", "subspace dimension ratio k/M in (0, 1)"),
        "sigma2": (_float_grid, "logspace:-1:-4:4", "noise powers for the capacity table"),
        "m": (_INT, "3", "feature count M for the DDT table"),
        "k": (_INT, "1", "subspace dimension k for the DDT table"),
        "r": (_float_grid, "0,0.75,1.5,1.8", "discrimination gains for the DDT table"),
    },
    "ddt": {
        "mode": (str, "ddt_linear", "ddt_linear or ddt_affine"),
        "n": (_INT, "3", "ambient dimension N"),
        "m": (_INT, "3", "feature count M"),
        "k": (_INT, "1", "subspace dimension k"),
        "sigma2": (_float_grid, "logspace:-1:-4:8", "noise-power grid"),
        "r": (_float_grid, "0,0.75,1.5,1.8", "discrimination gains"),
        "ensembles": (_INT, "100", "class ensembles per grid point"),
        "signals": (_INT, "100", "signals per ensemble"),
        "l_cap": (_INT, "100000", "grid points needing more classes are skipped"),
        "min_classes": (_INT, "2", "class counts below this are raised to it"),
        "seed": (_INT, "0", "master seed"),
    },
    "capacity": {
        "family": (str, "linear", "linear or affine classes"),
        "nu": (_FLOAT, "1.0", "ambient ratio N/M >= 1"),
        "kappa": (_FLOAT, "0.25", "subspace ratio k/M in (0, 1)"),
        "rho": (_float_grid, "0.1", "classification rates (bits per feature)"),
        "sigma2": (_float_grid, "0.01", "noise powers"),
        "m_grid": (_int_grid, "4,8,12,16", "feature counts M"),
        "ensembles": (_INT, "100", "class ensembles per grid point"),
        "signals": (_INT, "100", "signals per ensemble"),
        "l_cap": (_INT, "100000", "grid points needing more classes are skipped"),
        "seed": (_INT, "0", "master seed"),
    },
    "faces": {
        "data": (str, "", "directory with one subdirectory of P5 PGM images per class"),
        "synthetic": (_bool, "false", "use a synthetic corpus instead of --data"),
        "classes": (_INT, "10", "synthetic: number of classes"),
        "n": (_INT, "1024", "synthetic: pixels per image"),
        "per_class": (_INT, "60", "synthetic: images per class"),
        "true_k": (_INT, "9", "synthetic: true subspace dimension"),
        "noise": (_FLOAT, "0.001", "synthetic: per-pixel noise power"),
        "m_grid": (_int_grid, "2,4,6,8,10,12,14,16,20,25,30,40", "feature counts M"),
        "l_grid": (_int_grid, "", "class counts L (default 1..number of classes)"),
        "k_model": (_INT, "9", "rank of each fitted class model"),
        "l_max": (_INT, "38", "cap on predicted classes (0: number of classes)"),
        "tau": (_FLOAT, "0.2", "error threshold for the empirical class count"),
        "affine": (_bool, "false", "fit class means as well (affine models)"),
        "seed": (_INT, "0", "master seed"),
    },
}


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def resolve(command: str, flags: Dict[str, Optional[str]], config: Dict[str, str],
            env: Optional[Dict[str, str]] = None) -> Dict[str, object]:
    """Merge defaults < config < environment (seed only) < flags and parse every value."""
    env = os.environ if env is None else env
    spec = OPTIONS[command]
    unknown = sorted(set(config) - set(spec) - {"command"})
    if unknown:
        raise UsageError(f"unknown config key(s) for {command}: {', '.join(unknown)}")
    if config.get("command", command) != command:
        raise UsageError(f"config was written by '{config['command']}', not '{command}'")
    raw = {name: default for name, (_, default, _) in spec.items()}
    raw.update({k: v for k, v in config.items() if k in spec})
    if "seed" in spec and env.get(SEED_ENV):
        raw["seed"] = env[SEED_ENV]
    raw.update({k: v for k, v in flags.items() if v is not None and k in spec})
    out = {}
    for name, (cast, _, _) in spec.items():
        try:
            out[name] = cast(raw[name])
        except (TypeError, ValueError) as exc:
            raise UsageError(f"{_flag(name)}: invalid value {raw[name]!r} ({exc})") from None
    return out


def _header(command: str, params: Dict[str, object]) -> str:
    lines = [f"#@ command={command}"]
    for name, value in params.items():
        if isinstance(value, list):
            value = ",".join(_fmt(v) for v in value)
        lines.append(f"#@ {name}={_fmt(value)}")
    return "\n".join(lines) + "\n"


def _require(cond: bool, flag: str, message: str) -> None:
    if not cond:
        raise UsageError(f"{_flag(flag)}: {message}")


def cmd_bounds(p: Dict[str, object]) -> str:
    """Capacity-bound table over sigma2 and DDT-curve table over r."""
    _require(0 < p["kappa"] < 1, "kappa", "must lie in (0, 1)")
    _require(bool(p["sigma2"]), "sigma2", "grid is empty")
    _require(all(s > 0 for s in p["sigma2"]), "sigma2", "entries must be positive")
    _require(1 <= p["k"] < p["m"], "k", "need 1 <= k < m")
    _require(bool(p["r"]) and all(r >= 0 for r in p["r"]), "r", "need a non-empty grid of nonnegative gains")
    buf = io.StringIO()
    buf.write(_header("bounds", p))
    buf.write("sigma2,c_linear_lower,c_linear_upper,c_affine_lower,c_affine_upper\n")
    for s in p["sigma2"]:
        ll, lu = c_linear_bounds(p["kappa"], s)
        al, au = c_affine_bounds(p["kappa"], s)
        buf.write(",".join(_fmt(v) for v in (s, ll, lu, al, au)) + "\n")
    buf.write("\n# ddt\n")
    buf.write("r,d_linear_lower,d_linear_conjecture,d_linear_upper,d_affine\n")
    kinds = (DdtKind.LINEAR_LOWER, DdtKind.LINEAR_CONJECTURE, DdtKind.LINEAR_UPPER, DdtKind.AFFINE)
    for r in p["r"]:
        vals = [ddt_eval(DdtCurve(kind, p["m"], p["k"]), r) for kind in kinds]
        buf.write(",".join(_fmt(v) for v in (r, *vals)) + "\n")
    return buf.getvalue()


_ROW_COLUMNS = "errors,trials,p_hat,ci_low,ci_high,seed,note"


def _row_tail(row: SweepRow) -> str:
    e = row.estimate
    stats = ["", "", "", "", ""] if e is None else [e.errors, e.trials, e.p_hat, e.ci_low, e.ci_high]
    return ",".join(_fmt(v) for v in (*stats, row.master_seed, row.note))


def _check_sweep_common(p: Dict[str, object]) -> None:
    _require(bool(p["sigma2"]), "sigma2", "grid is empty")
    _require(all(s > 0 for s in p["sigma2"]), "sigma2", "entries must be positive")
    _require(p["ensembles"] >= 1, "ensembles", "must be >= 1")
    _require(p["signals"] >= 1, "signals", "must be >= 1")
    _require(p["l_cap"] >= 1, "l_cap", "must be >= 1")
    _require(0 <= p["seed"] < 2**64, "seed", "must be a 64-bit unsigned integer")


def cmd_ddt(p: Dict[str, object], threads: Optional[int] = None) -> str:
    """Error-vs-noise sweep with one fitted diversity gain per r."""
    _require(p["mode"] in ("ddt_linear", "ddt_affine"), "mode", "must be ddt_linear or ddt_affine")
    _check_sweep_common(p)
    _require(bool(p["r"]) and all(r >= 0 for r in p["r"]), "r", "need a non-empty grid of nonnegative gains")
    _require(1 <= p["k"] <= p["m"] <= p["n"], "m", "need 1 <= k <= m <= n")
    _require(p["min_classes"] >= 1, "min_classes", "must be >= 1")
    cfg = SweepConfig(p["mode"], tuple(p["sigma2"]), tuple(p["r"]), n=p["n"], m=p["m"], k=p["k"],
                      ensembles_per_point=p["ensembles"], signals_per_ensemble=p["signals"],
                      master_seed=p["seed"], l_cap=p["l_cap"], min_classes=p["min_classes"])
    rows = run_ddt_sweep(cfg, threads=threads)
    buf = io.StringIO()
    buf.write(_header("ddt", p))
    buf.write(f"mode,r,sigma2,l,m,n,k,{_ROW_COLUMNS}\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in (row.mode, row.gain, row.sigma2, row.l, row.m, row.n, row.k)))
        buf.write("," + _row_tail(row) + "\n")
    buf.write("\n# slopes\n")
    buf.write("r,d_hat,stderr,usable_rows,d_linear_lower,d_linear_conjecture,d_linear_upper,d_affine,note\n")
    for r in p["r"]:
        sel = [row for row in rows if row.gain == r]
        usable = sum(usable_for_slope(row) for row in sel)
        try:
            d_hat, se = fit_slope(sel)
            note = ""
        except InsufficientDataError:
            d_hat, se, note = float("nan"), float("nan"), "insufficient_data"
        if p["k"] < p["m"]:
            theory = [ddt_eval(DdtCurve(kind, p["m"], p["k"]), r) for kind in
                      (DdtKind.LINEAR_LOWER, DdtKind.LINEAR_CONJECTURE, DdtKind.LINEAR_UPPER, DdtKind.AFFINE)]
        else:
            theory = [0.0] * 4
        buf.write(",".join(_fmt(v) for v in (r, d_hat, se, usable, *theory, note)) + "\n")
    return buf.getvalue()


def cmd_capacity(p: Dict[str, object], threads: Optional[int] = None) -> str:
    """Error at finite M with N, k, L from the scaling laws, next to the capacity bounds."""
    _require(p["family"] in ("linear", "affine"), "family", "must be linear or affine")
    _check_sweep_common(p)
    _require(p["nu"] >= 1, "nu", "must be >= 1")
    _require(0 < p["kappa"] < 1, "kappa", "must lie in (0, 1)")
    _require(bool(p["rho"]) and all(r >= 0 for r in p["rho"]), "rho", "need a non-empty grid of nonnegative rates")
    _require(bool(p["m_grid"]) and all(m >= 1 for m in p["m_grid"]), "m_grid", "need a non-empty grid of M >= 1")
    affine = p["family"] == "affine"
    cfg = SweepConfig("capacity", tuple(p["sigma2"]), tuple(p["rho"]), m_grid=tuple(p["m_grid"]),
                      params=ScalingParams(p["nu"], p["kappa"]), affine=affine,
                      ensembles_per_point=p["ensembles"], signals_per_ensemble=p["signals"],
                      master_seed=p["seed"], l_cap=p["l_cap"])
    rows = run_capacity_sweep(cfg, threads=threads)
    bound = c_affine_bounds if affine else c_linear_bounds
    buf = io.StringIO()
    buf.write(_header("capacity", p))
    buf.write(f"rho,sigma2,m,n,k,l,c_lower,c_upper,{_ROW_COLUMNS}\n")
    for row in rows:
        lo, hi = bound(p["kappa"], row.sigma2)
        buf.write(",".join(_fmt(v) for v in (row.gain, row.sigma2, row.m, row.n, row.k, row.l, lo, hi)))
        buf.write("," + _row_tail(row) + "\n")
    return buf.getvalue()


def cmd_faces(p: Dict[str, object]) -> str:
    """Error matrix over (M, L) and the empirical vs predicted class-count curve."""
    from .empirical import load_image_dir, run_face_experiment, synthetic_corpus

    _require(bool(p["synthetic"]) or bool(p["data"]), "data", "give a corpus directory or --synthetic")
    _require(0 < p["tau"] <= 1, "tau", "must lie in (0, 1]")
    _require(p["k_model"] >= 1, "k_model", "must be >= 1")
    _require(0 <= p["seed"] < 2**64, "seed", "must be a 64-bit unsigned integer")
    if p["synthetic"]:
        _require(p["classes"] >= 1, "classes", "must be >= 1")
        _require(p["per_class"] >= 2, "per_class", "must be >= 2")
        _require(1 <= p["true_k"] <= p["n"], "true_k", "need 1 <= true_k <= n")
        _require(p["noise"] >= 0, "noise", "must be nonnegative")
        images = synthetic_corpus(p["classes"], p["n"], p["true_k"], p["noise"], p["per_class"], p["seed"])
    else:
        _require(Path(p["data"]).is_dir(), "data", f"{p['data']} is not a directory")
        images = load_image_dir(p["data"])
    l_grid = p["l_grid"] or list(range(1, images.class_count + 1))
    _require(bool(p["m_grid"]) and 1 <= min(p["m_grid"]) and max(p["m_grid"]) <= images.n, "m_grid",
             f"entries must lie in [1, {images.n}]")
    _require(1 <= min(l_grid) and max(l_grid) <= images.class_count, "l_grid",
             f"entries must lie in [1, {images.class_count}]")
    train_min = min(c - c // 2 for c in images.counts)
    _require(p["k_model"] <= min(train_min, images.n), "k_model",
             f"must not exceed the smallest training set ({train_min} images)")
    res = run_face_experiment(images, p["m_grid"], l_grid, p["k_model"], p["seed"], p["tau"],
                              p["l_max"] or None, affine=p["affine"])
    buf = io.StringIO()
    buf.write(_header("faces", p))
    buf.write("m,l,errors,trials,p_hat,ci_low,ci_high,sigma2_hat\n")
    for m, row, s2 in zip(res.m_grid, res.errors, res.sigma2_hat):
        for l, e in zip(res.l_grid, row):
            buf.write(",".join(_fmt(v) for v in (m, l, e.errors, e.trials, e.p_hat, e.ci_low, e.ci_high, s2)) + "\n")
    buf.write("\n# class_count\n")
    buf.write("m,sigma2_hat,max_l_empirical,predicted_classes\n")
    for m, s2, best, pred in zip(res.m_grid, res.sigma2_hat, res.max_l_empirical, res.predicted):
        buf.write(",".join(_fmt(v) for v in (m, s2, best, pred)) + "\n")
    return buf.getvalue()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="grasscap", description=__doc__.split("\n\n")[0],
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    epilogs = {
        "bounds": "CSV: sigma2,c_linear_lower,c_linear_upper,c_affine_lower,c_affine_upper; "
                  "then '# ddt' and r,d_linear_lower,d_linear_conjecture,d_linear_upper,d_affine",
        "ddt": f"CSV: mode,r,sigma2,l,m,n,k,{_ROW_COLUMNS}; then '# slopes' and "
               "r,d_hat,stderr,usable_rows,d_linear_lower,d_linear_conjecture,d_linear_upper,d_affine,note",
        "capacity": f"CSV: rho,sigma2,m,n,k,l,c_lower,c_upper,{_ROW_COLUMNS}",
        "faces": "CSV: m,l,errors,trials,p_hat,ci_low,ci_high,sigma2_hat; then '# class_count' and "
                 "m,sigma2_hat,max_l_empirical,predicted_classes",
    }
    for name, spec in OPTIONS.items():
        sp = sub.add_parser(name, help=(globals()[f"cmd_{name}"].__doc__ or "").strip(), epilog=epilogs[name])
        sp.add_argument("--config", help="key=value config file, or a previous output CSV")
        sp.add_argument("--out", help="output CSV path (default: stdout)")
        sp.add_argument("--threads", type=int, default=None, help="worker threads; never changes results")
        for opt, (_, default, help_text) in spec.items():
            sp.add_argument(_flag(opt), dest=opt, default=None, help=f"{help_text} [default: {default or 'none'}]")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    command = args.command
    try:
        config = {}
        if args.config:
            path = Path(args.config)
            if not path.is_file():
                raise UsageError(f"--config: {path} does not exist")
            config = parse_config(path.read_text(), str(path))
        flags = {name: getattr(args, name) for name in OPTIONS[command]}
        params = resolve(command, flags, config)
        if args.threads is not None and args.threads < 1:
            raise UsageError("--threads: must be >= 1")
        log.info("running %s", command)
        if command == "bounds":
            text = cmd_bounds(params)
        elif command == "faces":
            text = cmd_faces(params)
        else:
            text = globals()[f"cmd_{command}"](params, threads=args.threads)
    except UsageError as exc:
        print(f"grasscap {command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - any compute failure maps to exit status 1
        print(f"grasscap {command}: failed: {exc}", file=sys.stderr)
        return 1
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
