"""Command-line front end: ``verify``, ``eval`` and ``table``.

Settings come from built-in defaults, then an optional ``--config`` file,
then command-line flags (flags win).  Everything is validated before the
first sweep starts.

Exit codes: 0 success, 1 numerical failure or a failed verification,
2 usage or parse error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from . import association as A
from . import expr as E
from .mollifier import MollifierError, build_model_mollifier, default_model_mollifier, make_bump
from .quadrature import QuadratureError
from .reference import ReferenceError
from .testfn import CATALOG, TestFunction, get_test_function

__all__ = ["RunConfig", "UsageError", "load_config", "load_mollifier", "main"]

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
FORMATS = ("csv", "json", "pretty")
CSV_COLUMNS = ("case", "psi", "sigma", "re", "im", "quad_err")

_DEFAULTS = {
    "psi": "psiA psiB psiC",
    "sigma_min": 2.0 ** -12,
    "sigma_max": 2.0 ** -4,
    "grid_ratio": 0.5,
    "tol": None,
    "format": "pretty",
    "out": None,
    "mollifier": "default",
    "precision": "double",
    "jobs": 1,
}


class UsageError(Exception):
    """Bad flags, config or input text (exit 2)."""

    def __init__(self, message: str, offset: int | None = None, text: str | None = None):
        super().__init__(message)
        self.offset = offset
        self.text = text


@dataclass
class RunConfig:
    psis: list[TestFunction]
    plan: A.SweepPlan
    mollifier_source: str = "default"
    precision: str = "double"
    fmt: str = "pretty"
    out: str | None = None
    jobs: int = 1
    extra: dict = field(default_factory=dict)

    def mollifier(self):
        if self.mollifier_source == "default":
            return default_model_mollifier(self.precision)
        return load_mollifier(self.mollifier_source, self.precision)


# -- configuration ---------------------------------------------------------------

def _read_ini(path: str) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except configparser.Error as exc:
        raise UsageError(f"{path}: {exc}") from None
    return cp


def load_config(path: str | None) -> dict:
    """Flat settings from the ``[run]`` section of an INI file."""
    if path is None:
        return {}
    cp = _read_ini(path)
    if not cp.has_section("run"):
        raise UsageError(f"{path}: missing [run] section")
    out = {}
    for key, value in cp.items("run"):
        key = key.replace("-", "_")
        if key not in _DEFAULTS:
            raise UsageError(f"{path}: unknown key {key!r} in [run]")
        out[key] = value.strip()
    return out


def _parse_bump(text: str, where: str):
    parts = [p for p in text.replace(",", " ").split()]
    if len(parts) not in (2, 3):
        raise UsageError(f"{where}: expected 'center, halfwidth[, amplitude]', got {text!r}")
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise UsageError(f"{where}: non-numeric bump entry {text!r}") from None
    return make_bump(*vals)


def load_mollifier(path: str, precision: str = "double"):
    """Model mollifier from an INI file with ``[f]`` and ``[g]`` bump lists.

    Each key in a section is one bump, ``center, halfwidth[, amplitude]``::

        [f]
        b0 = 0, 1
        [g]
        b1 = -3, 1, 1
        b2 = 3, 1, 1
        b3 = -6, 1, -1
        b4 = 6, 1, -1
    """
    cp = _read_ini(path)
    bumps = {}
    for sec in ("f", "g"):
        if not cp.has_section(sec):
            raise UsageError(f"{path}: missing [{sec}] section")
        bumps[sec] = [_parse_bump(v, f"{path} [{sec}] {k}") for k, v in cp.items(sec)]
    try:
        return build_model_mollifier(bumps["f"], bumps["g"], precision)
    except MollifierError as exc:
        raise UsageError(f"{path}: {exc}") from None


def _float(name, value):
    try:
        return float(value)
    except (TypeError, ValueError):
        raise UsageError(f"--{name.replace('_', '-')}: expected a number, got {value!r}") from None


def build_config(args: argparse.Namespace) -> RunConfig:
    settings = dict(_DEFAULTS)
    settings.update(load_config(args.config))
    for key in _DEFAULTS:
        v = getattr(args, key, None)
        if v is not None:
            settings[key] = v

    psi_spec = settings["psi"]
    names = psi_spec if isinstance(psi_spec, list) else str(psi_spec).split()
    if not names:
        raise UsageError("no test function selected")
    psis = []
    for n in names:
        try:
            psis.append(get_test_function(n))
        except ValueError as exc:
            raise UsageError(str(exc)) from None

    precision = str(settings["precision"])
    if precision not in ("double", "extended"):
        raise UsageError(f"--precision must be double or extended, got {precision!r}")
    fmt = str(settings["format"])
    if fmt not in FORMATS:
        raise UsageError(f"--format must be one of {', '.join(FORMATS)}, got {fmt!r}")
    tol = settings["tol"]
    tol = None if tol in (None, "", "auto") else _float("tol", tol)
    try:
        jobs = int(settings["jobs"])
    except ValueError:
        raise UsageError(f"--jobs: expected an integer, got {settings['jobs']!r}") from None
    if jobs < 1:
        raise UsageError("--jobs must be at least 1")
    try:
        plan = A.SweepPlan.geometric(
            sigma_max=_float("sigma_max", settings["sigma_max"]),
            sigma_min=_float("sigma_min", settings["sigma_min"]),
            ratio=_float("grid_ratio", settings["grid_ratio"]),
            pair_tol=tol,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    cfg = RunConfig(psis=psis, plan=plan, mollifier_source=str(settings["mollifier"]),
                    precision=precision, fmt=fmt, out=settings["out"] or None, jobs=jobs)
    if cfg.mollifier_source != "default":
        cfg.mollifier()        # fail early on a bad file
    return cfg


# -- formatting ------------------------------------------------------------------

def _g(x) -> str:
    return repr(float(x))


def _cx(z) -> str:
    if z is None:
        return "-"
    z = complex(z)
    return f"{z.real:+.10e}{z.imag:+.3e}i"


def _csv_rows(items) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for case, psi, rep in items:
        for p in rep.values:
            w.writerow((case, psi, _g(p.sigma), _g(p.value.real), _g(p.value.imag), _g(p.quad_err)))
    return buf.getvalue()


def _json(items, extra_key=None) -> str:
    rows = []
    for case, psi, rep, *rest in items:
        d = {"case": case, "psi": psi}
        d.update(rep.to_dict())
        if extra_key and rest:
            d[extra_key] = rest[0]
        rows.append(d)
    return json.dumps(rows, indent=2) + "\n"


def _pretty(items) -> str:
    lines = [f"{'case':<20} {'psi':<8} {'verdict':<12} {'limit':<36} {'rel.dev':<9} status"]
    for case, psi, rep, status in items:
        dev = "-" if rep.rel_deviation is None else f"{rep.rel_deviation:.2e}"
        lim = _cx(rep.limit) if rep.limit is not None else f"{rep.leading} x {_cx(rep.leading_coeff)}"
        lines.append(f"{rep.label or case:<20} {psi:<8} {rep.verdict:<12} {lim:<36} {dev:<9} {status}")
        if rep.target is not None:
            lines.append(f"{'':<20} target {rep.target} = {_cx(rep.target_value)}")
    return "\n".join(lines) + "\n"


def _emit(text: str, out: str | None):
    if out is None:
        sys.stdout.write(text)
        return
    with open(out, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


# -- commands ---------------------------------------------------------------------

def _run_units(units, jobs):
    """Evaluate callables; results stay in submission order."""
    if jobs == 1:
        return [u() for u in units]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda u: u(), units))


def _safe(fn):
    def run():
        try:
            return fn(), None
        except (QuadratureError, A.AssociationError, FloatingPointError, ArithmeticError) as exc:
            return None, str(exc)
    return run


def cmd_verify(args, cfg: RunConfig) -> int:
    try:
        cases = A.resolve_cases(args.cases or ["all"])
    except A.AssociationError as exc:
        raise UsageError(str(exc)) from None
    m = cfg.mollifier()
    work = [(c, psi) for c in cases for psi in cfg.psis]
    results = _run_units([_safe(lambda c=c, psi=psi: A.verify_case(c, m, psi, cfg.plan))
                          for c, psi in work], cfg.jobs)
    items, ok, failures = [], True, []
    for (c, psi), (res, err) in zip(work, results):
        case = A.CASES[c]
        if err is not None:
            ok = False
            failures.append(f"{c} {psi.name}: {err}")
            continue
        tol = case.rel_tol_extended if cfg.precision == "extended" else case.rel_tol
        if isinstance(res, tuple):
            passed = A.embedding_distinguishes(res, tol)
            for r in res:
                items.append((c, psi.name, r, "PASS" if passed else "FAIL"))
        else:
            passed = res.passes(tol)
            items.append((c, psi.name, res, "PASS" if passed else "FAIL"))
        ok &= passed
    if cfg.fmt == "csv":
        text = _csv_rows([(r.label or c, p, r) for c, p, r, _ in items])
    elif cfg.fmt == "json":
        text = _json([(c, p, r, s == "PASS") for c, p, r, s in items], "pass")
    else:
        text = _pretty(items)
    _emit(text, cfg.out)
    for f in failures:
        print(f"error: {f}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_eval(args, cfg: RunConfig) -> int:
    try:
        E.parse(args.expression)
    except E.ExprError as exc:
        raise UsageError(f"parse error in expression: {exc}", exc.offset, args.expression) from None
    if args.target is not None:
        try:
            E.compile_reference(E.parse(args.target))
        except E.ExprError as exc:
            raise UsageError(f"parse error in target: {exc}", exc.offset, args.target) from None
        except ReferenceError as exc:
            raise UsageError(f"invalid target: {exc}") from None
    m = cfg.mollifier()
    try:
        E.compile(E.parse(args.expression), m)
    except E.ExprError as exc:
        raise UsageError(f"cannot compile expression: {exc}", exc.offset, args.expression) from None
    results = _run_units(
        [_safe(lambda psi=psi: A.evaluate_expression(args.expression, m, psi, cfg.plan,
                                                      args.target, label=args.expression))
         for psi in cfg.psis], cfg.jobs)
    items, code = [], EXIT_OK
    for psi, (rep, err) in zip(cfg.psis, results):
        if err is not None:
            print(f"error: {psi.name}: {err}", file=sys.stderr)
            code = EXIT_FAIL
            continue
        items.append((args.expression, psi.name, rep, rep.verdict))
    if cfg.fmt == "csv":
        text = _csv_rows([(c, p, r) for c, p, r, _ in items])
    elif cfg.fmt == "json":
        text = _json(items)
    else:
        text = _pretty(items)
    _emit(text, cfg.out)
    return code


def cmd_table(args, cfg: RunConfig) -> int:
    try:
        cases = A.resolve_cases(args.cases or ["all"])
    except A.AssociationError as exc:
        raise UsageError(str(exc)) from None
    m = cfg.mollifier()
    work = [(c, psi) for c in cases for psi in cfg.psis]
    results = _run_units([_safe(lambda c=c, psi=psi: A.verify_case(c, m, psi, cfg.plan))
                          for c, psi in work], cfg.jobs)
    items, code = [], EXIT_OK
    for (c, psi), (res, err) in zip(work, results):
        if err is not None:
            print(f"error: {c} {psi.name}: {err}", file=sys.stderr)
            code = EXIT_FAIL
            continue
        for r in (res if isinstance(res, tuple) else (res,)):
            items.append((r.label or c, psi.name, r))
    fmt = "csv" if cfg.fmt == "pretty" else cfg.fmt
    _emit(_csv_rows(items) if fmt == "csv" else _json(items), cfg.out)
    return code


# -- entry point ---------------------------------------------------------------------

def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="INI file with a [run] section; flags override it")
    p.add_argument("--psi", action="append",
                   help=f"test function: {', '.join(CATALOG)} or comma-separated polynomial "
                        "coefficients (repeatable; default all three catalog entries)")
    p.add_argument("--sigma-min", dest="sigma_min", type=float)
    p.add_argument("--sigma-max", dest="sigma_max", type=float)
    p.add_argument("--grid-ratio", dest="grid_ratio", type=float)
    p.add_argument("--tol", type=float, help="pairing tolerance (default 1e-10, 1e-13 extended)")
    p.add_argument("--format", choices=FORMATS)
    p.add_argument("--out", help="write output here instead of stdout")
    p.add_argument("--mollifier", help="INI file with [f] and [g] bump lists")
    p.add_argument("--precision", choices=("double", "extended"))
    p.add_argument("--jobs", type=int, help="worker threads (default 1)")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="colombeau",
                                     description="Numerical association checks for regularised products.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("verify", help="run catalog cases and compare with their targets")
    p.add_argument("cases", nargs="*", help="case ids, group names or 'all' (default)")
    _common(p)
    p = sub.add_parser("eval", help="sweep and fit an arbitrary expression")
    p.add_argument("expression")
    p.add_argument("--target", help="reference expression to compare the limit against")
    _common(p)
    p = sub.add_parser("table", help="emit the case x psi x sigma pairing table")
    p.add_argument("cases", nargs="*", help="case ids (default all)")
    _common(p)
    return parser


def _report_usage(exc: UsageError):
    print(f"error: {exc}", file=sys.stderr)
    if exc.offset is not None and exc.text is not None:
        print(f"  {exc.text}", file=sys.stderr)
        print(f"  {' ' * exc.offset}^ (offset {exc.offset})", file=sys.stderr)


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:        # argparse already printed the message
        return EXIT_USAGE if exc.code else EXIT_OK
    commands = {"verify": cmd_verify, "eval": cmd_eval, "table": cmd_table}
    try:
        cfg = build_config(args)
        return commands[args.command](args, cfg)
    except UsageError as exc:
        _report_usage(exc)
        return EXIT_USAGE
    except (QuadratureError, A.AssociationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
