"""floquet-certify command line.

Exit codes: 0 success or certificate pass, 1 certificate fail, 2 input
error, 3 numerical failure or indeterminate result.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import (
    FAIL,
    INDETERMINATE,
    PASS,
    certify_no_oscillatory,
    check_log_solution_bound,
    check_phase_bound,
    check_spectrum_bound,
    norm_integral,
    optimize_period_bound,
    period_lower_bound,
)
from .errors import FloquetError, InputError, NumericalFailure
from .hamiltonian import (
    certify_thm9,
    certify_thm10,
    certify_thm11,
    krein_classic,
    lambda1_oracle,
    multiplier_oracle,
    recommend_norm,
)
from .linalg import ALL_NORMS, NormKind, is_normal, mat_norm
from .ode import monodromy
from .system import (
    GainFunction,
    HamiltonianSpec,
    MatrixNormGain,
    SecondOrderSpec,
    SystemSpec,
    companion_lift,
    parse_system_file,
    system_to_dict,
)
from .witnesses import WITNESS_NAMES, WitnessId, make_witness, verify_sharpness

SCHEMA = "floquet-certify/1"
INFO = "info"
EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3
CSV_COLUMNS = ("param", "criterion", "lhs", "rhs", "margin", "verdict")
SWEEP_CRITERIA = ("no_oscillatory", "thm9", "thm10", "krein")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(f"{self.prog}: {message}")


def _row(criterion: str, lhs, rhs, margin, verdict: str, details: dict | None = None) -> dict:
    return {"criterion": criterion, "lhs": lhs, "rhs": rhs, "margin": margin,
            "verdict": verdict, "details": details or {}}


def exit_code(rows: list[dict]) -> int:
    verdicts = {r["verdict"] for r in rows}
    if INDETERMINATE in verdicts:
        return EXIT_NUMERIC
    if FAIL in verdicts:
        return EXIT_FAIL
    return EXIT_OK


# -- deterministic serialization ------------------------------------------------------


def _fmt_float(x: float) -> str:
    return "%.17g" % x


def _plain(obj):
    """Normalize to JSON-ready builtins; dict keys sorted, non-finite floats -> None."""
    if isinstance(obj, dict):
        return {str(k): _plain(obj[k]) for k in sorted(obj, key=str)}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, (complex, np.complexfloating)):
        return [_plain(obj.real), _plain(obj.imag)]
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def _dump(obj, indent: int = 0) -> str:
    pad = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_dump(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + "  " * indent + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(_dump(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _dump(v, indent + 1) for v in obj) + "\n" + "  " * indent + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, float):
        return _fmt_float(obj)
    if isinstance(obj, int):
        return str(obj)
    return json.dumps(obj, ensure_ascii=False)


def report_dict(command: str, config: dict, input_digest: str, rows: list[dict]) -> dict:
    results = []
    for r in rows:
        results.append({
            "criterion": r["criterion"],
            "lhs": _plain(r["lhs"]),
            "rhs": _plain(r["rhs"]),
            "margin": _plain(r["margin"]),
            "verdict": r["verdict"],
            "details": _plain(r["details"]),
        })
    return {"schema": SCHEMA, "version": __version__, "input_digest": input_digest,
            "command": command, "config": _plain(config), "results": results}


def render_json(report: dict) -> str:
    # top level and result rows keep their construction order; nested maps are sorted
    return _dump(report) + "\n"


def _csv_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return _fmt_float(v) if math.isfinite(v) else ""
    return str(v)


def render_csv(rows: list[dict], params: list | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for i, r in enumerate(rows):
        p = "" if params is None else params[i]
        w.writerow([_csv_value(p), r["criterion"], _csv_value(_plain(r["lhs"])),
                    _csv_value(_plain(r["rhs"])), _csv_value(_plain(r["margin"])), r["verdict"]])
    return buf.getvalue()


def _short(v) -> str:
    if isinstance(v, float):
        return "%.12g" % v
    if isinstance(v, list):
        if len(v) > 8:
            return f"[{len(v)} items]"
        return "[" + ", ".join(_short(x) for x in v) + "]"
    if isinstance(v, dict):
        return "{" + ", ".join(f"{k}: {_short(x)}" for k, x in v.items()) + "}"
    if v is None:
        return "-"
    return str(v)


def render_text(report: dict) -> str:
    lines = [f"floquet-certify {report['version']}  {report['command']}  input {report['input_digest']}"]
    for r in report["results"]:
        lines.append(f"{r['criterion']}: {r['verdict'].upper()}  lhs = {_short(r['lhs'])}  "
                     f"rhs = {_short(r['rhs'])}  margin = {_short(r['margin'])}")
        for key, value in r["details"].items():
            lines.append(f"    {key}: {_short(value)}")
    return "\n".join(lines) + "\n"


# -- inputs -----------------------------------------------------------------------


def _load(path: str):
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    try:
        obj = parse_system_file(data)
    except InputError as exc:
        raise InputError(f"{path}: {exc}") from None
    return obj, hashlib.sha256(data).hexdigest()


def _with_norm(obj, norm):
    if norm is None:
        return obj
    kind = NormKind.parse(norm)
    if isinstance(obj, SystemSpec):
        return obj.with_norm(kind)
    if isinstance(obj, HamiltonianSpec):
        return HamiltonianSpec(obj.H, kind)
    if isinstance(obj, SecondOrderSpec):
        return SecondOrderSpec(obj.P, kind)
    return obj


def _first_order_system(obj, c: float | None) -> SystemSpec:
    if isinstance(obj, SystemSpec):
        return companion_lift(obj, 1.0 if c is None else c) if obj.order > 1 else obj
    if isinstance(obj, SecondOrderSpec):
        return obj.to_hamiltonian().system()
    if isinstance(obj, HamiltonianSpec):
        return obj.system()
    raise InputError("this command needs a system file, not a gain")


def _gain_and_order(obj, order: int | None):
    if isinstance(obj, GainFunction):
        return obj, order or 1
    if isinstance(obj, SystemSpec):
        return MatrixNormGain(obj), order or obj.order
    if isinstance(obj, SecondOrderSpec):
        return MatrixNormGain(obj.P, obj.norm), order or 2
    if isinstance(obj, HamiltonianSpec):
        return MatrixNormGain(obj.JH(), obj.norm), order or 1
    raise InputError("unsupported input")  # pragma: no cover


def _cert_row(cert) -> dict:
    return cert.as_dict()


def _bound_row(rep) -> dict:
    return rep.as_dict()


def _need(obj, cls, what: str):
    if isinstance(obj, SecondOrderSpec) and cls is HamiltonianSpec:
        return obj.to_hamiltonian()
    if not isinstance(obj, cls):
        raise InputError(f"{what} needs a {_KIND_NAMES[cls]} file")
    return obj


_KIND_NAMES = {GainFunction: "gain", SystemSpec: "linear", HamiltonianSpec: "hamiltonian",
               SecondOrderSpec: "second-order"}


def _slack(tol) -> dict:
    return {} if tol is None else {"slack": tol}


# -- commands ---------------------------------------------------------------------


def _monodromy_rows(spec: SystemSpec, steps, method: str) -> list[dict]:
    res = monodromy(spec, steps, method)
    return [_row("monodromy", res.liouville_residual, None, None, INFO, res.as_dict())]


def _period_row(g, r: int, c: float | None) -> dict:
    if c is not None:
        res = period_lower_bound(g, r, c)
        return _row("period_lower_bound", res.T_star, None, None, INFO,
                    {"order": r, "c_star": res.c_star, "method": res.method})
    res = optimize_period_bound(g, r)
    d = res.as_dict()
    d.pop("curve")
    return _row("period_lower_bound", res.T_star, None, None, INFO, d)


def _oracle_row(obj) -> dict:
    rep = multiplier_oracle(obj)
    top = max(rep.moduli)
    return _row("multiplier_oracle", top, 1.0, 1.0 - top, INFO, rep.as_dict())


def _lambda1_row(obj) -> dict:
    res = lambda1_oracle(obj)
    d = res.as_dict()
    d["scan_points"] = len(d.pop("scan"))
    if not res.found:
        return _row("lambda1", None, 1.0, None, INDETERMINATE, d)
    d["central_region"] = res.lambda1 > 1.0
    return _row("lambda1", res.lambda1, 1.0, res.lambda1 - 1.0, INFO, d)


def _norm_rows(matrix, period: float) -> list[dict]:
    rows = []
    for kind in ALL_NORMS:
        N = norm_integral(MatrixNormGain(matrix, kind), period)
        rows.append(_row(f"norm_integral:{kind.value}", N, None, None, INFO, {"T": period}))
    return rows


def cmd_analyze(obj, args) -> list[dict]:
    tol = args.tol
    rows: list[dict] = []
    if isinstance(obj, GainFunction):
        rows.append(_row("norm_integral", norm_integral(obj, obj.period), None, None, INFO,
                         {"T": obj.period}))
        rows.append(_period_row(obj, 1, None))
        rows.append(_cert_row(certify_no_oscillatory(obj, obj.period, 1, **_slack(tol))))
        return rows
    if isinstance(obj, SystemSpec):
        rows += _norm_rows(obj.matrix, obj.period)
        g = MatrixNormGain(obj)
        rows.append(_period_row(g, obj.order, None))
        rows.append(_cert_row(certify_no_oscillatory(g, obj.period, obj.order, **_slack(tol))))
        first = _first_order_system(obj, None)
        rows += _monodromy_rows(first, args.steps, args.method)
        if obj.order == 1:
            rows.append(_bound_row(check_spectrum_bound(obj, **_slack(tol))))
        return rows
    h = _need(obj, HamiltonianSpec, "analyze")
    rows += _norm_rows(h.JH(), h.period)
    rows.append(_cert_row(certify_thm9(h, **_slack(tol))))
    if isinstance(obj, SecondOrderSpec):
        rows.append(_cert_row(certify_thm10(obj, **_slack(tol))))
        rows.append(_cert_row(krein_classic(obj, **_slack(tol))))
    rows.append(_oracle_row(obj))
    rows.append(_lambda1_row(obj))
    rec = recommend_norm(obj)
    rows.append(_row("norm_recommendation", None, None, None, INFO, rec))
    return rows


def cmd_monodromy(obj, args) -> list[dict]:
    return _monodromy_rows(_first_order_system(obj, None), args.steps, args.method)


def cmd_bound(obj, args) -> list[dict]:
    obj = _with_norm(obj, args.norm)
    tol = args.tol
    if args.which == "period":
        g, r = _gain_and_order(obj, args.order)
        return [_period_row(g, r, args.c)]
    if isinstance(obj, GainFunction):
        raise InputError(f"bound {args.which} needs a system file, not a gain")
    spec = _first_order_system(obj, args.c)
    fn = {"spectrum": check_spectrum_bound, "solution": check_log_solution_bound,
          "phase": check_phase_bound}[args.which]
    return [_bound_row(fn(spec, **_slack(tol)))]


def cmd_stability(obj, args) -> list[dict]:
    obj = _with_norm(obj, args.norm)
    tol = args.tol
    which = args.which
    if which == "thm9":
        return [_cert_row(certify_thm9(_need(obj, HamiltonianSpec, "thm9"), **_slack(tol)))]
    if which == "thm10":
        return [_cert_row(certify_thm10(_need(obj, SecondOrderSpec, "thm10"), **_slack(tol)))]
    if which == "krein":
        return [_cert_row(krein_classic(_need(obj, SecondOrderSpec, "krein"), **_slack(tol)))]
    if which == "thm11":
        return [_cert_row(certify_thm11(_need(obj, GainFunction, "thm11"), **_slack(tol)))]
    if isinstance(obj, (GainFunction, SystemSpec)):
        raise InputError(f"stability {which} needs a hamiltonian or second-order file")
    if which == "oracle":
        return [_oracle_row(obj)]
    return [_lambda1_row(obj)]


def _parse_value(text: str):
    if text.lower() in ("none", "null"):
        return None
    parts = text.split(",")
    vals = []
    for p in parts:
        p = p.strip()
        try:
            vals.append(int(p))
        except ValueError:
            try:
                vals.append(float(p))
            except ValueError:
                raise InputError(f"parameter value {text!r} is not a number or a comma list") from None
    return tuple(vals) if len(parts) > 1 else vals[0]


def _witness_id(args) -> WitnessId:
    params = {}
    for item in args.param or []:
        if "=" not in item:
            raise InputError(f"--param expects k=v, got {item!r}")
        k, v = item.split("=", 1)
        params[k.strip()] = _parse_value(v.strip())
    return WitnessId(args.name, params)


def cmd_witness(wid: WitnessId, args) -> list[dict]:
    spec = make_witness(wid)
    rows = [_row(f"witness:{wid.name}", None, None, None, INFO,
                 {"system": system_to_dict(spec), "params": wid.as_dict()["params"]})]
    if args.verify:
        rows.append(verify_sharpness(wid).as_dict())
    return rows


def cmd_compare_norms(obj, args) -> list[dict]:
    if isinstance(obj, GainFunction):
        raise InputError("compare-norms needs a system file, not a gain")
    rec = recommend_norm(obj)
    if isinstance(obj, SystemSpec):
        matrix = obj.matrix
    elif isinstance(obj, HamiltonianSpec):
        matrix = obj.JH()
    else:
        matrix = obj.P
    rows = [_row(f"norm_integral:{k}", v, None, None, INFO, {"T": matrix.period})
            for k, v in rec["integrals"].items()]
    ts = np.linspace(0.0, matrix.period, 256, endpoint=False)
    worst = -math.inf
    normal_count = 0
    for M in matrix(ts):
        if not is_normal(M):
            continue
        normal_count += 1
        e = mat_norm(M, NormKind.EUCLIDEAN)
        worst = max(worst, e - min(mat_norm(M, NormKind.SUP), mat_norm(M, NormKind.ONE)))
    if normal_count:
        verdict = PASS if worst <= 1e-9 else FAIL
        rows.append(_row("normal_norm_bound", worst, 0.0, -worst, verdict,
                         {"normal_samples": normal_count, "samples": len(ts),
                          "statement": "||A||_E <= min(||A||_sup, ||A||_one) for normal A"}))
    else:
        rows.append(_row("normal_norm_bound", None, None, None, INFO,
                         {"normal_samples": 0, "samples": len(ts), "note": "no normal samples"}))
    rows.append(_row("norm_recommendation", None, None, None, INFO, rec))
    return rows


def _sweep_range(text: str) -> tuple[str, np.ndarray]:
    try:
        name, rng = text.split("=", 1)
        a, b, n = rng.split(":")
        a, b, n = float(a), float(b), int(n)
    except ValueError:
        raise InputError(f"--param expects name=a:b:n, got {text!r}") from None
    if name != "period":
        raise InputError(f"only the period can be swept, got {name!r}")
    if n < 1 or not (a > 0 and b > 0):
        raise InputError("sweep needs n >= 1 and positive endpoints")
    return name, np.linspace(a, b, n)


def _sweep_certificate(obj, criterion: str, tol):
    if criterion == "thm9":
        return certify_thm9(_need(obj, HamiltonianSpec, "thm9"), **_slack(tol))
    if criterion == "thm10":
        return certify_thm10(_need(obj, SecondOrderSpec, "thm10"), **_slack(tol))
    if criterion == "krein":
        return krein_classic(_need(obj, SecondOrderSpec, "krein"), **_slack(tol))
    g, r = _gain_and_order(obj, None)
    if isinstance(obj, (HamiltonianSpec, SecondOrderSpec)):
        raise InputError("no_oscillatory needs a linear or gain file")
    return certify_no_oscillatory(g, obj.period, r, **_slack(tol))


def _default_criterion(obj) -> str:
    if isinstance(obj, SecondOrderSpec):
        return "thm10"
    if isinstance(obj, HamiltonianSpec):
        return "thm9"
    return "no_oscillatory"


def cmd_sweep(obj, args) -> tuple[list[dict], list]:
    obj = _with_norm(obj, args.norm)
    _, values = _sweep_range(args.param)
    criterion = args.criterion or _default_criterion(obj)
    rows, params = [], []
    for v in values:
        try:
            cert = _sweep_certificate(obj.with_period(float(v)), criterion, args.tol)
            row = cert.as_dict()
        except NumericalFailure as exc:
            row = _row(criterion, None, None, None, INDETERMINATE, {"error": str(exc)})
        rows.append(row)
        params.append(float(v))
    return rows, params


# -- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--format", choices=("text", "json", "csv"), default=argparse.SUPPRESS)
    common.add_argument("--tol", type=float, default=argparse.SUPPRESS,
                        help="slack used by certificate and bound verdicts")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="seed for randomized commands (recorded in the report)")
    common.add_argument("-o", "--output", default=argparse.SUPPRESS,
                        help="write the report here instead of standard output")

    p = _Parser(prog="floquet-certify", parents=[common],
                description="Norm-integral certificates for periodic linear systems.")
    p.add_argument("--version", action="version", version=f"floquet-certify {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("analyze", parents=[common], help="full report for a system file")
    a.add_argument("file")
    a.add_argument("--steps", type=int, default=None)
    a.add_argument("--method", default="rk4", choices=("rk4", "pe", "piecewise_exp"))

    m = sub.add_parser("monodromy", parents=[common], help="monodromy matrix and multipliers")
    m.add_argument("file")
    m.add_argument("--steps", type=int, default=None)
    m.add_argument("--method", default="rk4", choices=("rk4", "pe", "piecewise_exp"))

    b = sub.add_parser("bound", parents=[common], help="spectrum, solution, phase or period bounds")
    b.add_argument("which", choices=("spectrum", "solution", "phase", "period"))
    b.add_argument("file")
    b.add_argument("--order", type=int, default=None)
    b.add_argument("--c", type=float, default=None)
    b.add_argument("--norm", choices=("euclidean", "sup", "one"), default=None)

    s = sub.add_parser("stability", parents=[common], help="Hamiltonian strong-stability tests")
    s.add_argument("which", choices=("thm9", "thm10", "thm11", "krein", "oracle", "lambda1"))
    s.add_argument("file")
    s.add_argument("--norm", choices=("euclidean", "sup", "one"), default=None)

    w = sub.add_parser("witness", parents=[common], help="extremal systems and sharpness checks")
    w.add_argument("name", choices=WITNESS_NAMES)
    w.add_argument("--param", action="append", metavar="K=V")
    w.add_argument("--verify", action="store_true")

    c = sub.add_parser("compare-norms", parents=[common], help="norm comparison and recommendation")
    c.add_argument("file")

    sw = sub.add_parser("sweep", parents=[common], help="re-run a certificate over a period range")
    sw.add_argument("file")
    sw.add_argument("--param", required=True, metavar="period=a:b:n")
    sw.add_argument("--out", required=True, help="CSV destination ('-' for standard output)")
    sw.add_argument("--criterion", choices=SWEEP_CRITERIA, default=None)
    sw.add_argument("--norm", choices=("euclidean", "sup", "one"), default=None)
    return p


def _config(args) -> dict:
    skip = {"command"}
    cfg = {k: v for k, v in vars(args).items() if k not in skip}
    return cfg


def _emit(text: str, output: str | None) -> None:
    if output in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(output).write_text(text)


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    for key, default in (("format", "text"), ("tol", None), ("seed", 0), ("output", None)):
        if not hasattr(args, key):
            setattr(args, key, default)
    if args.tol is not None and not (math.isfinite(args.tol) and args.tol >= 0):
        print("error: --tol must be a nonnegative number", file=sys.stderr)
        return EXIT_INPUT
    params = None
    try:
        if args.command == "witness":
            wid = _witness_id(args)
            digest = hashlib.sha256(json.dumps(wid.as_dict(), sort_keys=True).encode()).hexdigest()
            rows = cmd_witness(wid, args)
            label = f"witness {wid.name}"
        else:
            obj, digest = _load(args.file)
            if args.command == "sweep":
                rows, params = cmd_sweep(obj, args)
            else:
                handler = {"analyze": cmd_analyze, "monodromy": cmd_monodromy, "bound": cmd_bound,
                           "stability": cmd_stability, "compare-norms": cmd_compare_norms}[args.command]
                rows = handler(obj, args)
            label = args.command + (f" {args.which}" if hasattr(args, "which") else "")
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (FloquetError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    report = report_dict(label, _config(args), digest, rows)
    if args.command == "sweep":
        table = render_csv(rows, params)
        _emit(table, args.out)
    if args.format == "json":
        text = render_json(report)
    elif args.format == "csv":
        text = render_csv(rows, params)
    else:
        text = render_text(report)
    # a sweep streaming its CSV to stdout already produced the output
    if not (args.command == "sweep" and args.out == "-" and args.output in (None, "-")):
        _emit(text, args.output)
    if args.command == "sweep":
        # a completed sweep is a successful run; only broken points change the exit code
        return EXIT_NUMERIC if any(r["verdict"] == INDETERMINATE for r in rows) else EXIT_OK
    return exit_code(rows)


def main(argv: list[str] | None = None) -> int:
    return run(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
