"""Command-line interface: ``rcca {test,simulate,estimate-lsd,coint,scan}``.

Input CSVs have a header row of series names and one row per date; an
optional leading ``date`` column is skipped.  They are transposed to p x n.
Reports are JSON (with ``schema_version``), tables are CSV.  Errors print a
JSON object on stderr and exit nonzero.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cca_core import DEFAULT_T
from .errors import (DataError, DimensionError, NumericalError, ParameterError, RccaError,
                     RegimeError)
from .estimators import elkaroui_estimate
from .simulate import (ALT_FAMILIES, NULL_FAMILIES, DgpSpec, empirical_power, empirical_size,
                       run_table, table_row, write_table)
from .testing import METHODS, SCHEMA_VERSION, _plain

DATA_DIR = Path(__file__).resolve().parent / "data"
COMMANDS = ("test", "simulate", "estimate-lsd", "coint", "scan")
SCAN_BINS = ((0.0, 0.05), (0.05, 0.1), (0.1, 0.2), (0.2, 0.3), (0.3, 0.4), (0.4, 0.5),
             (0.6, 0.7), (0.8, 0.9), (0.9, 1.0))

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_INPUT = 3
EXIT_NUMERICAL = 4
EXIT_OTHER = 5


# --------------------------------------------------------------- config
@dataclass
class RunConfig:
    command: str
    inputs: dict = field(default_factory=dict)
    method: str = "sn"
    t: float = DEFAULT_T
    alpha: float = 0.05
    seed: int = 0
    out: str | None = None
    center: bool = False
    standardize: bool = False
    prices: bool = False
    reps: int = 1000
    table: int | None = None
    rows: list | None = None
    dgp: str | None = None
    param: object = None
    dims: tuple | None = None

    def validate(self):
        if self.command not in COMMANDS:
            raise ParameterError(f"unknown command {self.command!r}")
        if not (math.isfinite(self.t) and self.t > 0):
            raise ParameterError(f"--t must be positive, got {self.t}")
        if not 0 < self.alpha < 0.5:
            raise ParameterError(f"--alpha must lie in (0, 0.5), got {self.alpha}")
        if self.method not in METHODS:
            raise ParameterError(f"unknown method {self.method!r}")
        if self.reps < 1:
            raise ParameterError("--reps must be at least 1")
        return self


def check_regime(method, p1, p2, n):
    """Reject method/dimension combinations before any computation."""
    if method in ("sn", "mlr"):
        if max(p1, p2) >= n:
            raise RegimeError(f"{method} needs p1, p2 < n (got {p1}, {p2}, {n})")
        if method == "mlr" and p1 + p2 >= n:
            raise RegimeError("mlr needs p1 + p2 < n")
    if method == "tn-split" and (n < 8 or p2 < 4):
        raise DimensionError("tn-split needs n >= 8 and p2 >= 4")


# ------------------------------------------------------------ ingestion
def read_matrix(path):
    """CSV with header and one row per date -> (names, p x n array)."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: no such file")
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if len(rows) < 2:
        raise DataError(f"{path}: needs a header row and at least one data row")
    header = [h.strip() for h in rows[0]]
    skip = 1 if header and header[0].lower() == "date" else 0
    names = header[skip:]
    if not names:
        raise DataError(f"{path}: no data columns")
    vals = np.empty((len(rows) - 1, len(names)))
    for i, row in enumerate(rows[1:], start=2):
        cells = row[skip:]
        if len(cells) != len(names):
            raise DataError(f"{path}: row {i} has {len(cells)} values, expected {len(names)}")
        for j, cell in enumerate(cells):
            cell = cell.strip()
            if cell == "" or cell.lower() in ("na", "nan", "null"):
                raise DataError(f"{path}: missing value at row {i}, column {names[j]!r}")
            try:
                vals[i - 2, j] = float(cell)
            except ValueError:
                raise DataError(f"{path}: non-numeric value {cell!r} at row {i}, "
                                f"column {names[j]!r}") from None
    if not np.all(np.isfinite(vals)):
        raise DataError(f"{path}: non-finite values")
    return names, vals.T


def ingest_prices(path, standardize=False):
    """Prices by date -> p x (n - 1) matrix of log returns."""
    names, P = read_matrix(path)
    bad = np.argwhere(P <= 0)
    if bad.size:
        j, i = bad[0]
        raise DataError(f"{path}: non-positive price {P[j, i]} at row {i + 2}, "
                        f"column {names[j]!r}")
    if P.shape[1] < 2:
        raise DataError(f"{path}: need at least two dates for returns")
    R = np.diff(np.log(P), axis=1)
    return names, (standardize_rows(R) if standardize else R)


def standardize_rows(A):
    A = A - A.mean(axis=1, keepdims=True)
    sd = A.std(axis=1, keepdims=True)
    return A / np.where(sd > 0, sd, 1.0)


def center_rows(A):
    return A - A.mean(axis=1, keepdims=True)


def coint_construct(dY):
    """Even-indexed differences to X, odd-indexed to Y (1-based), equal widths."""
    dY = np.asarray(dY, dtype=float)
    if dY.ndim != 2:
        raise DimensionError("differences must be a p x T matrix")
    T = dY.shape[1]
    if T < 4:
        raise DimensionError(f"cointegration construction needs T >= 4, got {T}")
    X = dY[:, 1::2]
    Y = dY[:, 0::2]
    m = min(X.shape[1], Y.shape[1])
    return X[:, :m], Y[:, :m]


def _load(cfg, key):
    path = cfg.inputs[key]
    if cfg.prices:
        _, A = ingest_prices(path, standardize=cfg.standardize)
    else:
        _, A = read_matrix(path)
        if cfg.standardize:
            A = standardize_rows(A)
    return center_rows(A) if cfg.center and not cfg.standardize else A


def _method_kwargs(cfg):
    kw = {"alpha": cfg.alpha}
    if cfg.method.startswith("tn"):
        kw["t"] = cfg.t
    if cfg.method == "tn-sparse":
        kw["seed"] = cfg.seed
    return kw


def _run_test(cfg, X, Y):
    check_regime(cfg.method, X.shape[0], Y.shape[0], X.shape[1])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rep = METHODS[cfg.method](X, Y, **_method_kwargs(cfg))
    if caught:
        rep.diagnostics["warnings"] = [str(w.message) for w in caught]
    return rep


# ------------------------------------------------------------- commands
def cmd_test(cfg):
    X, Y = _load(cfg, "x"), _load(cfg, "y")
    return _run_test(cfg, X, Y).as_dict()


def cmd_coint(cfg):
    _, L = read_matrix(cfg.inputs["x"])
    if cfg.prices:
        if np.any(L <= 0):
            raise DataError("non-positive level with --prices")
        L = np.log(L)
    dY = np.diff(L, axis=1)
    if cfg.standardize:
        dY = standardize_rows(dY)
    elif cfg.center:
        dY = center_rows(dY)
    X, Y = coint_construct(dY)
    out = _run_test(cfg, X, Y).as_dict()
    out["construction"] = {"p": int(L.shape[0]), "T": int(dY.shape[1]), "n": int(X.shape[1])}
    return out


def cmd_estimate_lsd(cfg):
    X = _load(cfg, "x")
    H = elkaroui_estimate(X)
    return {"schema_version": SCHEMA_VERSION, "p1": int(X.shape[0]), "n": int(X.shape[1]),
            "measure": H.to_dict()}


def cmd_simulate(cfg):
    if cfg.table is not None:
        return run_table(cfg.table, rows=cfg.rows, K=cfg.reps, alpha=cfg.alpha,
                         seed=cfg.seed, t=cfg.t)
    if cfg.dgp is None:
        raise ParameterError("simulate needs --table or --dgp")
    rows_in = cfg.rows or ([cfg.dims] if cfg.dims else None)
    if not rows_in:
        raise ParameterError("simulate --dgp needs --rows or --p1/--p2/--n")
    out = []
    for p1, p2, n in rows_in:
        spec = DgpSpec(cfg.dgp, p1, p2, n, seed=cfg.seed, param=cfg.param)
        check_regime(cfg.method, p1, p2, n)
        if spec.family in NULL_FAMILIES:
            res = empirical_size(spec, cfg.method, cfg.reps, cfg.alpha, cfg.t)
        else:
            pre = "square" if spec.family == "arch" else None
            res = empirical_power(spec, cfg.method, cfg.reps, cfg.alpha, cfg.t, preprocess=pre)
        out.append(table_row(spec, cfg.method, res))
    return out


def scan_pvalues(A, B, p1, p2, n, reps, method="sn", seed=0, alpha=0.05, t=DEFAULT_T):
    """p-values from ``reps`` random draws of p1 rows of A and p2 rows of B.

    Series are drawn without replacement within each repetition; the first n
    columns are used.
    """
    if A.shape[1] < n or B.shape[1] < n:
        raise DimensionError(f"need at least n = {n} returns, have {A.shape[1]}, {B.shape[1]}")
    if p1 > A.shape[0] or p2 > B.shape[0]:
        raise DimensionError(f"cannot draw ({p1}, {p2}) series from ({A.shape[0]}, {B.shape[0]})")
    check_regime(method, p1, p2, n)
    rng = np.random.default_rng(seed)
    kw = {"alpha": alpha}
    if method.startswith("tn"):
        kw["t"] = t
    pv = []
    for _ in range(reps):
        ia = rng.choice(A.shape[0], size=p1, replace=False)
        ib = rng.choice(B.shape[0], size=p2, replace=False)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            pv.append(METHODS[method](A[ia, :n], B[ib, :n], **kw).p_value)
    return np.asarray(pv)


def bin_pvalues(pv):
    """Counts per printed interval; the uncovered gaps go to an ``unbinned`` row."""
    counts = []
    used = np.zeros(pv.size, dtype=bool)
    for k, (lo, hi) in enumerate(SCAN_BINS):
        last = k == len(SCAN_BINS) - 1
        m = (pv >= lo) & ((pv <= hi) if last else (pv < hi)) & ~used
        used |= m
        counts.append({"lo": lo, "hi": hi, "count": int(m.sum())})
    counts.append({"lo": "unbinned", "hi": "", "count": int((~used).sum())})
    return counts


def cmd_scan(cfg):
    xa = cfg.inputs.get("x") or DATA_DIR / "section_a.csv"
    xb = cfg.inputs.get("y") or DATA_DIR / "section_b.csv"
    if not cfg.dims:
        raise ParameterError("scan needs --p1, --p2 and --n")
    _, A = ingest_prices(xa, standardize=cfg.standardize)
    _, B = ingest_prices(xb, standardize=cfg.standardize)
    if cfg.center and not cfg.standardize:
        A, B = center_rows(A), center_rows(B)
    p1, p2, n = cfg.dims
    pv = scan_pvalues(A, B, p1, p2, n, cfg.reps, cfg.method, cfg.seed, cfg.alpha, cfg.t)
    return bin_pvalues(pv)


# ---------------------------------------------------------------- output
def atomic_write(path, text):
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _emit_json(obj, out):
    text = json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n"
    if out:
        atomic_write(out, text)
    else:
        sys.stdout.write(text)


def _emit_csv(rows, fields, out):
    if out:
        if fields == "table":
            write_table(rows, out)
            return
        import io
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
        atomic_write(out, buf.getvalue())
        return
    w = csv.DictWriter(sys.stdout, fieldnames=list(rows[0]))
    w.writeheader()
    w.writerows(rows)


def _parse_rows(text):
    if not text:
        return None
    rows = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = [int(v) for v in chunk.split(",")]
        if len(parts) != 3:
            raise ParameterError(f"--rows entries are p1,p2,n triples, got {chunk!r}")
        rows.append(tuple(parts))
    return rows


def _parse_param(text, dgp):
    if text is None:
        return None
    if dgp == "arch":
        a = [float(v) for v in text.split(",")]
        if len(a) != 2:
            raise ParameterError("arch --param is 'a0,a1'")
        return tuple(a)
    return int(text)


def build_parser():
    ap = argparse.ArgumentParser(prog="rcca", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--method", default="sn", choices=sorted(METHODS))
        p.add_argument("--t", type=float, default=DEFAULT_T)
        p.add_argument("--alpha", type=float, default=0.05)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out")
        p.add_argument("--center", action="store_true", help="subtract row means")
        p.add_argument("--standardize", action="store_true", help="row-standardize")

    p = sub.add_parser("test", help="run a test on X.csv and Y.csv")
    common(p)
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--prices", action="store_true", help="inputs are prices; use log returns")

    p = sub.add_parser("simulate", help="size/power tables")
    common(p)
    p.add_argument("--table", type=int)
    p.add_argument("--rows", help="p1,p2,n triples separated by ';'")
    p.add_argument("--dgp", choices=NULL_FAMILIES + ALT_FAMILIES)
    p.add_argument("--param")
    p.add_argument("--reps", type=int, default=1000)
    for d in ("--p1", "--p2", "--n"):
        p.add_argument(d, type=int)

    p = sub.add_parser("estimate-lsd", help="estimate the population spectral law of X")
    common(p)
    p.add_argument("--x", required=True)
    p.add_argument("--prices", action="store_true")

    p = sub.add_parser("coint", help="cointegration check on series levels")
    common(p)
    p.add_argument("--x", required=True)
    p.add_argument("--prices", action="store_true", help="take logs of the levels first")

    p = sub.add_parser("scan", help="p-value histogram over random series subsets")
    common(p)
    p.add_argument("--x", help="prices of the first section (default: bundled fixture)")
    p.add_argument("--y", help="prices of the second section (default: bundled fixture)")
    p.add_argument("--reps", type=int, default=100)
    for d in ("--p1", "--p2", "--n"):
        p.add_argument(d, type=int)
    return ap


def config_from_args(ns):
    dims = None
    if getattr(ns, "p1", None) is not None:
        if ns.p2 is None or ns.n is None:
            raise ParameterError("--p1, --p2 and --n go together")
        dims = (ns.p1, ns.p2, ns.n)
    inputs = {k: getattr(ns, k) for k in ("x", "y") if getattr(ns, k, None)}
    dgp = getattr(ns, "dgp", None)
    return RunConfig(
        command=ns.command, inputs=inputs, method=ns.method, t=ns.t, alpha=ns.alpha,
        seed=ns.seed, out=ns.out, center=ns.center, standardize=ns.standardize,
        prices=getattr(ns, "prices", False), reps=getattr(ns, "reps", 1000),
        table=getattr(ns, "table", None), rows=_parse_rows(getattr(ns, "rows", None)),
        dgp=dgp, param=_parse_param(getattr(ns, "param", None), dgp), dims=dims).validate()


def run(cfg):
    """Execute a validated config; returns the report object."""
    if cfg.command == "test":
        return cmd_test(cfg)
    if cfg.command == "coint":
        return cmd_coint(cfg)
    if cfg.command == "estimate-lsd":
        return cmd_estimate_lsd(cfg)
    if cfg.command == "simulate":
        return cmd_simulate(cfg)
    return cmd_scan(cfg)


def _exit_code(exc):
    if isinstance(exc, (DataError, DimensionError, ParameterError, RegimeError)):
        return EXIT_INPUT
    if isinstance(exc, NumericalError):
        return EXIT_NUMERICAL
    return EXIT_OTHER


def _fail(exc, code):
    kind = getattr(exc, "code", type(exc).__name__)
    err = {"schema_version": SCHEMA_VERSION, "error": kind, "type": type(exc).__name__,
           "message": str(exc), "exit_code": code}
    sys.stderr.write(json.dumps(err) + "\n")
    return code


def main(argv=None):
    ns = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(ns)
        result = run(cfg)
        if cfg.command == "simulate":
            _emit_csv(result, "table", cfg.out)
        elif cfg.command == "scan":
            _emit_csv(result, "scan", cfg.out)
        else:
            _emit_json(result, cfg.out)
    except RccaError as exc:
        return _fail(exc, _exit_code(exc))
    except (OSError, ValueError) as exc:
        return _fail(exc, EXIT_INPUT)
    except Exception as exc:  # noqa: BLE001 - reported as machine-readable JSON
        return _fail(exc, EXIT_UNEXPECTED)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
