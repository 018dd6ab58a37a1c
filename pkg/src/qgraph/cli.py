"""Command-line front end.

Data goes to stdout (or ``-o``); diagnostics go to stderr.  Exit status is
0 on success, 1 on input errors and 2 on numerical failures; every failure
prints one JSON line {"error", "type", "field", "exit"} on stderr.
"""
from __future__ import annotations

import argparse
import glob
import json
import math
import os
import re
import sys
import warnings

import numpy as np

from . import __version__
from .errors import (BudgetExceededError, GraphInputError, IncompleteSpectrumError, NumericalError,
                     QGraphError, ResidualError)
from .graph import load_graph, save_graph

INPUT_ERROR = 1
NUMERICAL_ERROR = 2
RESIDUAL_TOL = 1e-6


class ArgumentError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ArgumentError(message)


def _positive(kind):
    def conv(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}")
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
        return v
    return conv


def _seed(text):
    v = int(text, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return v


def _int_list(text):
    out = []
    for part in text.split(","):
        if "-" in part:
            a, b = part.split("-")
            out.extend(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    return out


def _f(x: float) -> str:
    return f"{float(x):.17g}"


def _cjson(z) -> list:
    z = np.asarray(z)
    return np.stack([z.real, z.imag], axis=-1).tolist()


# ---------------------------------------------------------------------------
# subcommands (each returns the text to write)
# ---------------------------------------------------------------------------

def _spectrum(args, g):
    from .spectrum import find_spectrum
    sp = find_spectrum(g, args.kmax, grid_step=args.grid_step, tol=args.tol, threads=args.threads)
    if len(sp.residual) and float(sp.residual.max()) > RESIDUAL_TOL:
        raise ResidualError(f"largest residual {float(sp.residual.max()):.3e} above {RESIDUAL_TOL:g}")
    if sp.audit is not None and not sp.audit.consistent and not sp.audit.heuristic:
        raise NumericalError(f"root audit failed: counted {sp.audit.counted}, found {sp.audit.found}")
    if args.format == "json":
        return json.dumps({"k": sp.k.tolist(), "multiplicity": sp.multiplicity.tolist(),
                           "residual": sp.residual.tolist(), "k_max": sp.k_max,
                           "notes": sp.warnings}, sort_keys=True) + "\n"
    return sp.to_csv()


def _eigfun(args, g):
    from .spectrum import eigenfunctions_at
    efs = eigenfunctions_at(g, args.k, residual_tol=RESIDUAL_TOL)
    lines = ["state,edge_id,x,psi_re,psi_im"]
    for i, ef in enumerate(efs):
        for e, x, p in ef.sample(args.per_unit_length):
            lines.append(f"{i:d},{e:d},{_f(x)},{_f(p.real)},{_f(p.imag)}")
    return "\n".join(lines) + "\n"


def _scatter(args, g):
    from .scattering import open_scattering_matrix, wigner_smith
    res = open_scattering_matrix(g, args.k)
    ws = wigner_smith(g, args.k)
    out = {"k": args.k, "S": _cjson(res.S), "R": _cjson(res.R), "Q": _cjson(ws.Q),
           "unitarity_error": float(np.abs(res.S @ res.S.conj().T - np.eye(len(res.S))).max()),
           "removable_singularity": res.singular, "notes": res.notes}
    return json.dumps(out, sort_keys=True) + "\n"


def _secular(args, g):
    from .spectrum import secular_function
    xi = secular_function(g, args.k)
    return f"k,xi_re,xi_im\n{_f(args.k)},{_f(xi.real)},{_f(xi.imag)}\n"


def _dtn(args, g):
    from .dtn import all_vertex_dtn, find_spectrum_dtn, reduce_dtn
    out = {}
    if args.k is not None:
        lam = all_vertex_dtn(g, args.k, loops=args.loops)
        boundary = args.boundary if args.boundary is not None else [v.id for v in g.vertices]
        red = reduce_dtn(lam, boundary)
        out["k"] = args.k
        out["boundary"] = [lab if isinstance(lab, int) else list(lab) for lab in red.labels]
        out["matrix"] = red.matrix.tolist()
    if args.kmax is not None:
        sp = find_spectrum_dtn(g, args.kmax, loops=args.loops)
        out["spectrum"] = {"k": sp.k.tolist(), "multiplicity": sp.multiplicity.tolist(),
                           "masked_windows": [list(m) for m in sp.masked]}
    if not out:
        raise GraphInputError("dtn needs --k and/or --kmax", "argv")
    return json.dumps(out, sort_keys=True) + "\n"


def _orbits(args, g):
    from .orbits import enumerate_primitive_orbits, orbits_of_length, orbits_to_csv
    prim = enumerate_primitive_orbits(g, args.nmax, max_orbits=args.max_orbits)
    if args.all:
        orbs = [o for n in range(1, args.nmax + 1) for o in orbits_of_length(g, n, prim)]
    else:
        orbs = prim
    orbs = sorted(orbs, key=lambda o: (o.n, o.L, o.sequence))
    return orbits_to_csv(orbs)


def _trace_check(args, g):
    from .orbits import GaussianTestFunction, trace_formula_check
    from .spectrum import find_spectrum
    L_cut = args.lcut if args.lcut is not None else 20.0 * float(g.bond_lengths.max())
    h = GaussianTestFunction.for_cutoff(L_cut, args.tail, args.center)
    sp = find_spectrum(g, h.support_radius(1e-17), threads=args.threads)
    rep = trace_formula_check(g, sp, h, L_cut)
    out = {"spectral_side": rep.spectral_side, "geometric_side": rep.geometric_side,
           "residual": rep.residual, "truncation_bound": rep.truncation_bound, "ok": rep.ok,
           "sigma": h.sigma, "L_cut": L_cut, "n_primitive_orbits": rep.n_primitive_orbits,
           "zero_mode_multiplicity": rep.zero_mode_multiplicity,
           "zero_mode_sensitivity": rep.zero_mode_sensitivity, "notes": rep.notes}
    if not rep.ok:
        sys.stdout.write(json.dumps(out, sort_keys=True) + "\n")
        raise NumericalError(f"trace formula residual {rep.residual:.3e} exceeds bound")
    return json.dumps(out, sort_keys=True) + "\n"


def _classical(args, g):
    from .orbits import classical_map
    from .statistics import TANNER_C, tanner_gap_report
    cm = classical_map(g)
    rep = tanner_gap_report(g, args.c if args.c is not None else TANNER_C)
    out = {"M": cm.M.tolist(), "eigenvalues": _cjson(cm.eigenvalues),
           "bistochastic_error": cm.bistochastic_error(), **rep.to_dict()}
    return json.dumps(out, sort_keys=True) + "\n"


def _formfactor(args, g):
    from .statistics import form_factor_sweep_csv
    return form_factor_sweep_csv(g, args.n, args.samples, args.seed, args.threads)


def _spacings(args, g):
    from .spectrum import find_n_states
    from .statistics import spacing_distribution
    sp = find_n_states(g, args.n_states, threads=args.threads)
    s = spacing_distribution(sp, bins=args.bins, hist_range=(0.0, args.smax))
    return s.histogram_csv()


def _nodal(args, g):
    from .nodal import magnetic_hessian_morse_index, nodal_data, nodal_report_csv
    rows = nodal_data(g, args.n_states)
    if args.morse:
        for d in rows:
            if d.generic and d.k > 0:
                d.morse_index = magnetic_hessian_morse_index(g, d.n, args.fd_step, k=d.k).morse_index
    return nodal_report_csv(rows)


def _magnetic(args, g):
    from .nodal import magnetic_hessian_morse_index
    mb = magnetic_hessian_morse_index(g, args.n, args.fd_step, full=args.full)
    out = {"n": mb.n, "k": mb.k, "hessian": mb.hessian.tolist(), "eigenvalues": mb.eigenvalues.tolist(),
           "morse_index": mb.morse_index, "kernel_dim": mb.kernel_dim, "expected_kernel": mb.expected_kernel,
           "gradient": mb.gradient.tolist(), "parameters": mb.parameters, "threshold": mb.threshold}
    if args.full and not mb.kernel_ok:
        sys.stdout.write(json.dumps(out, sort_keys=True) + "\n")
        raise NumericalError(f"Hessian kernel dimension {mb.kernel_dim}, expected {mb.expected_kernel}")
    return json.dumps(out, sort_keys=True) + "\n"


def _surgery(args, g):
    from . import surgery as sg
    if args.op == "dirichlet":
        if not args.vertices:
            raise GraphInputError("--vertices required", "vertices")
        rec = sg.dirichlet_surgery(g, args.vertices)
    elif args.op == "split":
        if args.vertex is None or not args.partition:
            raise GraphInputError("--vertex and --partition required", "partition")
        groups = [[int(x) for x in grp.split(",") if x] for grp in args.partition.split(";")]
        rec = sg.split_surgery(g, args.vertex, groups,
                               None if args.couplings is None else [float(x) for x in args.couplings.split(",")])
    else:
        if not args.alpha:
            raise GraphInputError("--alpha required", "alpha")
        asg = {}
        for item in args.alpha.split(","):
            v, a = item.split(":")
            asg[int(v)] = float(a)
        rec = sg.coupling_surgery(g, asg)
    if args.graph_out:
        save_graph(rec.after, args.graph_out)
    if not args.check:
        return rec.after.to_json() + "\n"
    rep = sg.verify_surgery(rec, args.nmax, args.threads)
    if not rep.ok:
        sys.stdout.write(rep.to_json() + "\n")
        raise NumericalError(f"{len(rep.violations)} interlacing violations")
    return rep.to_json() + "\n"


# ---------------------------------------------------------------------------
# regression suite
# ---------------------------------------------------------------------------

_NUMBER = re.compile(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?|nan|-?inf")


def _numbers_match(got: str, want: str, rtol: float) -> bool:
    """Same text skeleton and numbers equal to a relative tolerance."""
    if _NUMBER.sub("#", got) != _NUMBER.sub("#", want):
        return False
    for p, q in zip(_NUMBER.findall(got), _NUMBER.findall(want)):
        if p != q and not math.isclose(float(p), float(q), rel_tol=rtol, abs_tol=rtol):
            return False
    return True


def _regress(args):
    files = sorted(glob.glob(os.path.join(args.fixtures, "*.json")))
    if not files:
        raise GraphInputError(f"no fixtures in {args.fixtures}", "fixtures")
    failed = []
    lines = ["fixture,status"]
    for path in files:
        with open(path) as fh:
            fx = json.load(fh)
        argv = [a.replace("{root}", args.root) for a in fx["argv"]]
        got = _capture(argv)
        ok = got[0] == fx.get("exit", 0) and _numbers_match(got[1], fx["stdout"], fx.get("rtol", 1e-9))
        lines.append(f"{os.path.basename(path)},{'PASS' if ok else 'FAIL'}")
        if not ok:
            failed.append(os.path.basename(path))
    if failed:
        sys.stdout.write("\n".join(lines) + "\n")
        raise NumericalError(f"regression mismatch: {' '.join(failed)}")
    return "\n".join(lines) + "\n"


def _capture(argv) -> tuple[int, str]:
    import io
    from contextlib import redirect_stderr, redirect_stdout
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = run(argv)
    return code, out.getvalue()


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qgraph", description="Quantum graph spectral toolkit")
    p.add_argument("--version", action="version", version=__version__)
    common = _Parser(add_help=False)
    common.add_argument("-o", "--output", help="write data here instead of stdout")
    common.add_argument("--threads", type=_positive(int), default=None,
                        help="worker threads (default: QGRAPH_THREADS or all cores)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def cmd(name, help_, graph=True):
        s = sub.add_parser(name, help=help_, parents=[common])
        if graph:
            s.add_argument("graph", help="graph JSON file")
        return s

    s = cmd("spectrum", "eigenvalues k with multiplicities")
    s.add_argument("--kmax", type=_positive(float), required=True)
    s.add_argument("--tol", type=_positive(float), default=1e-12)
    s.add_argument("--grid-step", type=_positive(float), default=None)
    s.add_argument("--format", choices=("csv", "json"), default="csv")

    s = cmd("eigfun", "sampled eigenfunctions at an eigenvalue")
    s.add_argument("--k", type=_positive(float), required=True)
    s.add_argument("--per-unit-length", type=_positive(float), default=100.0)

    s = cmd("scatter", "open-graph scattering matrix, internal response and Wigner-Smith matrix")
    s.add_argument("--k", type=_positive(float), required=True)

    s = cmd("secular", "value of det(I - U(k))")
    s.add_argument("--k", type=_positive(float), required=True)

    s = cmd("dtn", "reduced DtN matrix and/or DtN-route spectrum")
    s.add_argument("--k", type=_positive(float), default=None)
    s.add_argument("--boundary", type=_int_list, default=None, help="comma separated vertex ids")
    s.add_argument("--kmax", type=_positive(float), default=None)
    s.add_argument("--loops", choices=("split", "direct"), default="split")

    s = cmd("orbits", "primitive periodic orbits up to a topological length")
    s.add_argument("--nmax", type=_positive(int), required=True)
    s.add_argument("--all", action="store_true", help="include repetitions")
    s.add_argument("--max-orbits", type=_positive(int), default=10 ** 7)

    s = cmd("trace-check", "trace formula with a Gaussian test function")
    s.add_argument("--lcut", type=_positive(float), default=None)
    s.add_argument("--tail", type=_positive(float), default=1e-12)
    s.add_argument("--center", type=float, default=0.0)

    s = cmd("classical", "classical map, gap and Tanner verdict")
    s.add_argument("--c", type=_positive(float), default=None, help="Tanner threshold constant")

    s = cmd("formfactor", "phase-averaged form factor sweep")
    s.add_argument("--n", type=_int_list, required=True, help="e.g. 1-6 or 1,2,5")
    s.add_argument("--samples", type=_positive(int), default=100000)
    s.add_argument("--seed", type=_seed, default=0)

    s = cmd("spacings", "unfolded nearest-neighbour spacing histogram")
    s.add_argument("--n-states", type=_positive(int), default=500)
    s.add_argument("--bins", type=_positive(int), default=40)
    s.add_argument("--smax", type=_positive(float), default=4.0)

    s = cmd("nodal", "nodal counts, domains and surplus")
    s.add_argument("--n-states", type=_positive(int), default=50)
    s.add_argument("--morse", action="store_true", help="also compute magnetic Morse indices")
    s.add_argument("--fd-step", type=_positive(float), default=1e-4)

    s = cmd("magnetic", "magnetic Hessian and Morse index of state n")
    s.add_argument("--n", type=_positive(int), required=True)
    s.add_argument("--fd-step", type=_positive(float), default=1e-4)
    s.add_argument("--full", action="store_true", help="vary every bond phase and check the kernel")

    s = cmd("surgery", "apply a surgery and optionally check interlacing")
    s.add_argument("--op", choices=("dirichlet", "split", "coupling"), required=True)
    s.add_argument("--vertices", type=_int_list, default=None)
    s.add_argument("--vertex", type=int, default=None)
    s.add_argument("--partition", default=None, help="endpoint positions, groups separated by ';'")
    s.add_argument("--couplings", default=None, help="new couplings when splitting a delta vertex")
    s.add_argument("--alpha", default=None, help="v:alpha pairs, comma separated")
    s.add_argument("--check", action="store_true")
    s.add_argument("--nmax", type=_positive(int), default=30)
    s.add_argument("--graph-out", default=None)

    s = cmd("regress", "re-run the checked-in example fixtures", graph=False)
    s.add_argument("--fixtures", default=os.path.join("tests", "fixtures"))
    s.add_argument("--root", default=".")
    return p


_COMMANDS = {
    "spectrum": _spectrum, "eigfun": _eigfun, "scatter": _scatter, "secular": _secular,
    "dtn": _dtn, "orbits": _orbits, "trace-check": _trace_check, "classical": _classical,
    "formfactor": _formfactor, "spacings": _spacings, "nodal": _nodal, "magnetic": _magnetic,
    "surgery": _surgery,
}


def _fail(code: int, exc: BaseException, field: str | None = None) -> int:
    msg = {"error": str(exc).splitlines()[0] if str(exc) else type(exc).__name__,
           "type": type(exc).__name__, "field": field, "exit": code}
    sys.stderr.write(json.dumps(msg, sort_keys=True) + "\n")
    return code


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
    except ArgumentError as exc:
        return _fail(INPUT_ERROR, exc, "argv")
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            if args.command == "regress":
                text = _regress(args)
            else:
                text = _COMMANDS[args.command](args, load_graph(args.graph))
    except GraphInputError as exc:
        return _fail(INPUT_ERROR, exc, exc.field)
    except (NumericalError, BudgetExceededError, IncompleteSpectrumError, np.linalg.LinAlgError) as exc:
        return _fail(NUMERICAL_ERROR, exc)
    except QGraphError as exc:
        return _fail(INPUT_ERROR, exc)
    except (ValueError, KeyError, OSError) as exc:
        return _fail(INPUT_ERROR, exc)
    if args.output:
        with open(args.output, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
