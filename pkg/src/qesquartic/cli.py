"""Command-line front end.

    qesquartic solve      --N 2 --ell 1/2 --beta 1/2 --gamma 1/3
    qesquartic asymptotic --N 5 [--ell 1e6 --beta 1 --gamma 0]
    qesquartic sweep      --N 2 --k 0 --ell-range 1e2:1e6:9 --beta 1/2 --gamma -3/10
    qesquartic verify     record.json

Exit codes: 0 success; 1 usage error or unreadable input; 2 nothing found
(``solve``) or incomplete branch (``sweep``); 3 failed verification.
Records go to standard output, diagnostics to standard error.
"""
from __future__ import annotations

import argparse
import logging
import re
import sys
from fractions import Fraction
from typing import List, Optional, Sequence

import mpmath
import numpy as np

from . import _numeric as nm
from .asymptotic import asymptotic_spectrum, multiplets, rescaled_matrix
from .core import (
    DomainError,
    InternalParameters,
    ModelParameters,
    d_coupling,
    internal_from_model,
    model_from_internal,
    parse_real,
)
from .magyari import KERNEL_RTOL, MagyariSystem, assemble, pivoted_kernel, residual_report
from .oracle import ode_certificate
from .records import (
    OutputRecord,
    RecordError,
    from_json,
    row_values,
    solution_row,
    to_csv,
    to_json,
)
from .solver import solve_all, sweep

EXIT_OK, EXIT_ERROR, EXIT_EMPTY, EXIT_FAILED = 0, 1, 2, 3

RESIDUAL_RTOL = 1e-10
ODE_RTOL = 1e-10

log = logging.getLogger("qesquartic")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _real(text):
    try:
        return parse_real(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _bits(text):
    b = int(text)
    if b <= 0:
        raise argparse.ArgumentTypeError("precision must be a positive number of bits")
    # anything up to a hardware double runs in doubles
    return nm.DOUBLE_BITS if b <= 64 else b


def _add_couplings(p, with_ell=True):
    g = p.add_argument_group("couplings (give either the model or the internal set)")
    g.add_argument("--B", type=_real, help="cubic coupling B")
    g.add_argument("--C", type=_real, help="quadratic coupling C")
    if with_ell:
        g.add_argument("--G", "--g", dest="G", type=_real, help="1/x^2 coupling G")
        g.add_argument("--L", type=_real, help="partial wave L (default 0)")
    g.add_argument("--beta", type=_real, help="B/2")
    g.add_argument("--gamma", type=_real, help="(beta^2 - C)/2")
    if with_ell:
        g.add_argument("--ell", type=_real, help="effective angular momentum")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qesquartic", description="QES conditions of the PT-symmetric quartic oscillator")
    p.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="all (E, F) pairs at finite ell")
    s.add_argument("--N", type=int, required=True, help="polynomial degree")
    _add_couplings(s)
    s.add_argument("--precision", type=_bits, default=nm.DOUBLE_BITS, help="bits (default: double)")
    s.add_argument("--strategy", choices=("scan", "continuation"), default="scan")
    s.add_argument("--format", choices=("json", "csv"), default="json")
    s.add_argument("--real-only", action="store_true", help="drop solutions not flagged real")

    a = sub.add_parser("asymptotic", help="strong-core multiplets and leading-order spectra")
    a.add_argument("--N", type=int, required=True)
    a.add_argument("--ell", type=_real, help="evaluate leading-order (E, F) at this ell")
    a.add_argument("--beta", type=_real, default=Fraction(0))
    a.add_argument("--gamma", type=_real, default=Fraction(0))
    a.add_argument("--format", choices=("json", "csv"), default="json")

    w = sub.add_parser("sweep", help="follow one branch across a geometric ell grid")
    w.add_argument("--N", type=int, required=True)
    w.add_argument("--k", type=int, required=True, help="branch index 0..N//2")
    w.add_argument("--ell-range", required=True, metavar="LO:HI:POINTS")
    _add_couplings(w, with_ell=False)
    w.add_argument("--precision", type=_bits, default=128)
    w.add_argument("--format", choices=("json", "csv"), default="json")

    v = sub.add_parser("verify", help="re-check a JSON record")
    v.add_argument("path")
    return p


# -- parameter handling --------------------------------------------------------


def _internal(args, with_ell=True) -> InternalParameters:
    model = [k for k in ("B", "C", "G", "L") if getattr(args, k, None) is not None]
    internal = [k for k in ("beta", "gamma", "ell") if getattr(args, k, None) is not None]
    if model and internal:
        raise UsageError(f"mix of model couplings {model} and internal parameters {internal}; use one set")
    if internal or not model:
        ell = getattr(args, "ell", None)
        return InternalParameters(
            beta=args.beta if args.beta is not None else Fraction(0),
            gamma=args.gamma if args.gamma is not None else Fraction(0),
            ell=(ell if ell is not None else Fraction(0)) if with_ell else Fraction(1),
        )
    mp = ModelParameters(
        B=args.B if args.B is not None else Fraction(0),
        C=args.C if args.C is not None else Fraction(0),
        G=getattr(args, "G", None) or Fraction(0),
        L=getattr(args, "L", None) or Fraction(0),
        N=args.N,
    )
    return internal_from_model(mp)


def _parameters_block(ip: InternalParameters, N: int, L=Fraction(0), include_ell=True):
    mp = model_from_internal(ip, N=N, L=L)
    model = {"B": mp.B, "C": mp.C, "N": N}
    if include_ell:
        model.update(G=mp.G, L=L, D=mp.D)
    internal = {"beta": ip.beta, "gamma": ip.gamma}
    if include_ell:
        internal["ell"] = ip.ell
    return {"model": model, "internal": internal}


def _arg_echo(args) -> dict:
    return {k: (str(v) if isinstance(v, Fraction) else v) for k, v in vars(args).items() if v is not None}


def _emit(rec: OutputRecord, fmt: str, out):
    out.write(to_csv(rec) if fmt == "csv" else to_json(rec) + "\n")


# -- commands ----------------------------------------------------------------


def cmd_solve(args, out) -> int:
    if args.N < 0:
        raise UsageError("--N must be >= 0")
    ip = _internal(args)
    sys_ = MagyariSystem(N=args.N, ell=ip.ell, beta=ip.beta, gamma=ip.gamma)
    sols = solve_all(sys_, strategy=args.strategy, precision_bits=args.precision)
    if args.real_only:
        sols = [s for s in sols if s.is_real()]
    escalated = sum(1 for s in sols if s.precision_bits > args.precision)
    if escalated:
        print(f"note: {escalated} solution(s) needed escalation to higher precision", file=sys.stderr)
    D = d_coupling(ip.ell, ip.beta, ip.gamma, args.N)
    L = args.L if getattr(args, "L", None) is not None else Fraction(0)
    rec = OutputRecord(
        command="solve",
        arguments=_arg_echo(args),
        parameters=_parameters_block(ip, args.N, L=L),
        solutions=[solution_row(s, D=D) for s in sols],
        precision_bits=max([args.precision] + [s.precision_bits for s in sols]),
    )
    _emit(rec, args.format, out)
    return EXIT_OK if sols else EXIT_EMPTY


def cmd_asymptotic(args, out) -> int:
    if args.N < 0:
        raise UsageError("--N must be >= 0")
    table = []
    for m in multiplets(args.N):
        row = {"k": m.k, "t_k": m.t_k, "h": list(m.h)}
        if args.ell is not None:
            E, F = asymptotic_spectrum(args.N, m.k, float(args.ell), float(args.beta), float(args.gamma))
            row.update(E=float(E), F=float(F))
        table.append(row)
    ip = InternalParameters(beta=args.beta, gamma=args.gamma, ell=args.ell if args.ell is not None else Fraction(0))
    rec = OutputRecord(
        command="asymptotic",
        arguments=_arg_echo(args),
        parameters=_parameters_block(ip, args.N, include_ell=args.ell is not None),
        extras={"multiplets": table},
    )
    if args.format == "csv":
        cols = ["k", "t_k", "h"] + (["E", "F"] if args.ell is not None else [])
        out.write(",".join(cols) + "\n")
        for r in table:
            cells = [str(r["k"]), str(r["t_k"]), " ".join(str(x) for x in r["h"])]
            cells += [repr(r["E"]), repr(r["F"])] if args.ell is not None else []
            out.write(",".join(cells) + "\n")
    else:
        out.write(to_json(rec) + "\n")
    return EXIT_OK


def parse_ell_range(text: str) -> np.ndarray:
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"--ell-range must be LO:HI:POINTS, got {text!r}")
    try:
        lo, hi = float(parse_real(parts[0])), float(parse_real(parts[1]))
        n = int(parts[2])
    except ValueError as exc:
        raise UsageError(f"--ell-range: {exc}") from None
    if not (0 < lo and n >= 1 and (lo < hi or (n == 1 and lo == hi))):
        raise UsageError("--ell-range needs 0 < LO < HI and POINTS >= 1 (LO == HI only with one point)")
    return np.geomspace(lo, hi, n) if n > 1 else np.array([lo])


def cmd_sweep(args, out) -> int:
    grid = parse_ell_range(args.ell_range)
    if not 0 <= args.k <= args.N // 2:
        raise UsageError(f"--k must lie in 0..{args.N // 2}")
    ip = _internal(args, with_ell=False)
    template = MagyariSystem(N=args.N, ell=Fraction(1), beta=ip.beta, gamma=ip.gamma)
    rec_sw = sweep(template, args.k, grid, bits=args.precision)
    rows = []
    for ell, sol, s, t in zip(rec_sw.ells, rec_sw.solutions, rec_sw.s, rec_sw.t):
        with mpmath.workprec(sol.precision_bits):
            s_re, s_im = (s.real, s.imag)
            t_re, t_im = (t.real, t.imag)
        D = d_coupling(nm.real_at(ell, sol.precision_bits), nm.real_at(ip.beta, sol.precision_bits),
                       nm.real_at(ip.gamma, sol.precision_bits), args.N)
        rows.append(solution_row(sol, D=D, ell=ell, s_re=s_re, s_im=s_im, t_re=t_re, t_im=t_im))
    rec = OutputRecord(
        command="sweep",
        arguments=_arg_echo(args),
        parameters=_parameters_block(ip, args.N, include_ell=False),
        solutions=rows,
        extras={"footer": {"N": args.N, "k": args.k, "t_k": rec_sw.t_k,
                           "exponent": rec_sw.exponent, "complete": rec_sw.complete}},
        precision_bits=args.precision,
    )
    _emit(rec, args.format, out)
    return EXIT_OK if rec_sw.complete and rows else EXIT_EMPTY


def _minor_check(A, bits):
    worst = 0.0
    for rows in (A[:-1], A[1:]):
        sv = nm.singular_values(rows, bits)
        ratio = float(min(sv) / max(sv)) if max(sv) != 0 else 0.0
        worst = max(worst, ratio)
    return worst


def verify_record(rec: OutputRecord) -> List[dict]:
    """Re-check every stored solution; one entry per (solution, check)."""
    checks = []
    if rec.command == "asymptotic":
        N = rec.parameters["model"]["N"]
        for m in rec.extras.get("multiplets", []):
            h = [Fraction(x) for x in m["h"]]
            t = Fraction(m["t_k"])
            r = rescaled_matrix(N, t, t).dot(np.array(h, dtype=object))
            checks.append({"index": m["k"], "check": "rescaled-kernel", "passed": all(x == 0 for x in r),
                           "value": max(abs(x) for x in r)})
        return checks
    internal = rec.parameters["internal"]
    N = int(rec.parameters["model"]["N"])
    for i, row in enumerate(rec.solutions):
        bits = int(row["precision_bits"])
        ell = row.get("ell", internal.get("ell"))
        sys_ = MagyariSystem(N=N, ell=ell, beta=internal["beta"], gamma=internal["gamma"])
        sysw = sys_.cast(bits) if bits > nm.DOUBLE_BITS else sys_
        E, F, omega = row_values(row)
        with mpmath.workprec(max(bits, nm.DOUBLE_BITS)):
            rep = residual_report(sysw, E, F, omega)
            rel = float(rep.relative)
            tol = float(nm.scaled_tolerance(RESIDUAL_RTOL, bits))
            checks.append({"index": i, "check": "residual", "passed": rel <= tol, "value": rel})
            dim, _ = pivoted_kernel(sysw, E, F, bits=bits)
            checks.append({"index": i, "check": "kernel", "passed": dim >= 1, "value": dim})
            ratio = _minor_check(assemble(sysw, E, F), bits)
            checks.append({"index": i, "check": "minors", "passed": ratio < float(nm.scaled_tolerance(KERNEL_RTOL, bits)),
                           "value": ratio})
        cert = ode_certificate(sys_, E, F, omega, bits=max(bits, 128))
        value = float(cert.max_abs_coefficient / cert.scale) if not cert.exact else float(cert.max_abs_coefficient)
        checks.append({"index": i, "check": "ode", "passed": cert.passes(ODE_RTOL), "value": value})
    return checks


def cmd_verify(args, out) -> int:
    try:
        with open(args.path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"{args.path}: cannot read: {exc.strerror}", file=sys.stderr)
        return EXIT_ERROR
    try:
        rec = from_json(text)
        checks = verify_record(rec)
    except RecordError as exc:
        print(f"{args.path}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (KeyError, TypeError, ValueError, DomainError) as exc:
        print(f"{args.path}: ill-formed record: {exc!r}", file=sys.stderr)
        return EXIT_ERROR
    failed = [c for c in checks if not c["passed"]]
    report = OutputRecord(command="verify", arguments={"path": args.path}, parameters={},
                          extras={"checks": checks, "passed": not failed})
    out.write(to_json(report) + "\n")
    for c in failed:
        print(f"FAILED solution {c['index']}: {c['check']} (value {c['value']})", file=sys.stderr)
    return EXIT_FAILED if failed else EXIT_OK


COMMANDS = {"solve": cmd_solve, "asymptotic": cmd_asymptotic, "sweep": cmd_sweep, "verify": cmd_verify}


_NEGATIVE = re.compile(r"^-(\d|\.\d)[\d./eE+-]*$")


def _glue_negatives(argv: Sequence[str]) -> List[str]:
    """Turn ``--gamma -3/10`` into ``--gamma=-3/10`` so argparse does not see a flag."""
    out: List[str] = []
    for tok in argv:
        if out and out[-1].startswith("--") and "=" not in out[-1] and _NEGATIVE.match(tok):
            out[-1] = f"{out[-1]}={tok}"
        else:
            out.append(tok)
    return out


def main(argv: Optional[Sequence[str]] = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    argv = _glue_negatives(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                            format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
        return COMMANDS[args.command](args, out)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(str(exc), file=sys.stderr)
        return EXIT_ERROR
    except (DomainError, ValueError) as exc:
        print(f"qesquartic: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
