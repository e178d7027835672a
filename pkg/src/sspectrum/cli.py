"""Command-line front end.

Exit codes: 0 success, 1 a verification instance failed, 2 malformed input,
3 numerical failure. Every report carries a ``config`` header with the
arguments and tolerances that produced it.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (
    DivergenceError,
    DomainError,
    InstabilityError,
    NotFredholmError,
    NumericError,
    PreconditionError,
    SpectralPointError,
    SSpectrumError,
    UnsupportedOperationError,
)
from .fredholm import (
    SET_TOL,
    BlockTriangularAlgebra,
    IdentityHomomorphism,
    boundary_s_spectrum,
    fredholm_s_spectrum,
    inverse_spectral_map,
    inversion_of_boundary,
    product_spectra_off_imaginaries,
    theorem_sum_spectra,
    verify_sum_identity,
    weyl_s_spectrum,
)
from .qmat import GridSpec, QMatrix, is_invertible, s_spectrum_exact, s_spectrum_scan
from .quat import SPHERE_TOL, Quaternion
from .sresolvent import resolvent_report
from . import shiftlab

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3
VERIFY_SUITES = ("sum", "inverse", "product", "identity-e1", "boundary", "shift-boundary")


class InputError(Exception):
    """Malformed command-line input or input file."""


@dataclass
class RunConfig:
    command: str
    inputs: list[str] = field(default_factory=list)
    grid: str | None = None
    inv_tol: float | None = None
    sphere_tol: float = SPHERE_TOL
    out: str = "json"
    seed: int | None = None
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.sphere_tol <= 0 or (self.inv_tol is not None and self.inv_tol <= 0):
            raise InputError("tolerances must be positive")
        if self.out not in ("json", "csv"):
            raise InputError(f"unknown output format {self.out!r}")

    def header(self) -> dict:
        return {"command": self.command, "inputs": self.inputs, "grid": self.grid, "out": self.out,
                "seed": self.seed, "options": self.options, "version": __version__,
                "tolerances": {"invertibility": self.inv_tol if self.inv_tol is not None
                               else "1e-9*max(1,||A||)",
                               "sphere_dedup": self.sphere_tol, "sphere_compare": SET_TOL}}


# parsing helpers --------------------------------------------------------------

def parse_quaternion(text: str) -> Quaternion:
    """``"0.5"`` or ``"w,x,y,z"`` (fewer than four components are zero-padded)."""
    try:
        parts = [float(t) for t in text.split(",")]
    except ValueError:
        raise InputError(f"cannot parse quaternion {text!r}; use 'w' or 'w,x,y,z'") from None
    if not 1 <= len(parts) <= 4:
        raise InputError(f"quaternion needs 1 to 4 components, got {len(parts)}")
    return Quaternion(*(parts + [0.0] * (4 - len(parts))))


def parse_range(text: str) -> list[int]:
    """``"5"``, ``"1..10"`` or ``"1,3,5"``."""
    try:
        if ".." in text:
            a, b = text.split("..")
            out = list(range(int(a), int(b) + 1))
        else:
            out = [int(t) for t in text.split(",")]
    except ValueError:
        raise InputError(f"cannot parse integer range {text!r}") from None
    if not out:
        raise InputError(f"empty integer range {text!r}")
    return out


def _read_json(path: str):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None


def load_matrix(path: str) -> QMatrix:
    obj = _read_json(path)
    try:
        return QMatrix.from_json(obj)
    except DomainError as exc:
        raise InputError(f"{path}: {exc}") from None


def load_op(name: str, power: int = 1) -> shiftlab.ShiftOp:
    if name in shiftlab.NAMED_OPS:
        op = shiftlab.named_op(name)
    else:
        try:
            op = shiftlab.ShiftOp.from_json(_read_json(name))
        except DomainError as exc:
            raise InputError(f"{name}: {exc}") from None
    if power < 0:
        raise InputError("--power must be non-negative")
    return op ** power


def _homomorphism(args, A: QMatrix):
    if args.hom == "identity":
        return IdentityHomomorphism()
    k1 = args.k1 if args.k1 is not None else A.n // 2
    if not 1 <= k1 < A.n:
        raise InputError(f"--k1 must lie in [1, {A.n - 1}]")
    alg = BlockTriangularAlgebra(k1, A.n - k1)
    if not alg.contains(A, tol=1e-12):
        raise InputError("matrix is not block upper-triangular for the requested --k1")
    return alg.projection()


# output -----------------------------------------------------------------------

def _jsonable(x):
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, Quaternion):
        return x.to_list()
    raise TypeError(f"not serialisable: {type(x).__name__}")


def render_json(cfg: RunConfig, result) -> str:
    return json.dumps({"config": cfg.header(), "result": result}, indent=2, sort_keys=True,
                      default=_jsonable) + "\n"


def render_csv(cfg: RunConfig, body: str) -> str:
    return "# config: " + json.dumps(cfg.header(), sort_keys=True, default=_jsonable) + "\n" + body


def _emit(args, text: str) -> None:
    if getattr(args, "output", None):
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)


# commands ---------------------------------------------------------------------

def _cfg(args, inputs=(), **options) -> RunConfig:
    return RunConfig(command=args.command_path, inputs=list(inputs), grid=getattr(args, "grid", None),
                     inv_tol=getattr(args, "tol", None), sphere_tol=getattr(args, "sphere_tol", SPHERE_TOL),
                     out=getattr(args, "out", "json"), seed=getattr(args, "seed", None), options=options)


def cmd_spectrum(args) -> int:
    A = load_matrix(args.matrix)
    cfg = _cfg(args, [args.matrix])
    spheres = s_spectrum_exact(A, tol=args.sphere_tol)
    _emit(args, render_json(cfg, {"kind": "S", "spheres": [s.to_dict() for s in spheres], "excluded": "none"}))
    return EXIT_OK


def cmd_scan(args) -> int:
    A = load_matrix(args.matrix)
    grid = _grid(args.grid)
    cfg = _cfg(args, [args.matrix])
    res = s_spectrum_scan(A, grid)
    if args.out == "csv":
        _emit(args, render_csv(cfg, res.to_csv()))
    else:
        _emit(args, render_json(cfg, {"rows": [list(r) for r in res.rows()]}))
    return EXIT_OK


def _grid(text):
    if text is None:
        raise InputError("--grid u0,u1,r1,step is required")
    try:
        return GridSpec.parse(text)
    except DomainError as exc:
        raise InputError(str(exc)) from None


def cmd_resolvent(args) -> int:
    A = load_matrix(args.matrix)
    q = parse_quaternion(args.q)
    cfg = _cfg(args, [args.matrix], q=q.to_list(), N=args.N)
    _emit(args, render_json(cfg, resolvent_report(A, q, args.N)))
    return EXIT_OK


def cmd_fredholm_spectrum(args) -> int:
    A = load_matrix(args.matrix)
    h = _homomorphism(args, A)
    cfg = _cfg(args, [args.matrix], homomorphism=h.name, exclude=args.exclude)
    rep = fredholm_s_spectrum(h, A).excluding(args.exclude)
    _emit(args, render_json(cfg, rep.to_json()))
    return EXIT_OK


def cmd_weyl_spectrum(args) -> int:
    A = load_matrix(args.matrix)
    h = _homomorphism(args, A)
    cfg = _cfg(args, [args.matrix], homomorphism=h.name, exclude=args.exclude)
    rep = weyl_s_spectrum(h, A).excluding(args.exclude)
    _emit(args, render_json(cfg, rep.to_json()))
    return EXIT_OK


def cmd_boundary_spectrum(args) -> int:
    A = load_matrix(args.matrix)
    cfg = _cfg(args, [args.matrix], eps=args.eps)
    _emit(args, render_json(cfg, boundary_s_spectrum(A, eps=args.eps).to_json()))
    return EXIT_OK


# verify -------------------------------------------------------------------------

def _random_shift(rng: np.random.Generator) -> shiftlab.ShiftOp:
    terms = {int(m): Quaternion(*rng.normal(size=4)) for m in rng.choice([-2, -1, 0, 1, 2], size=2, replace=False)}
    fin = {(int(i), int(j)): Quaternion(*rng.normal(size=4)) for i, j in rng.integers(-2, 3, size=(2, 2))}
    return shiftlab.ShiftOp.from_terms(terms, fin)


def _random_q(rng: np.random.Generator) -> Quaternion:
    v = rng.normal(size=4)
    return Quaternion(*(v / np.linalg.norm(v) * rng.uniform(0.5, 2.0)))


def _instance(name, fn):
    """Run one theorem instance; precondition violations are reported, not fatal."""
    try:
        out = fn()
    except (PreconditionError, DomainError, SpectralPointError, UnsupportedOperationError) as exc:
        return {"name": name, "passed": False, "error": f"{type(exc).__name__}: {exc}"}
    out.setdefault("name", name)
    return out


def verify_identity(rng, trials: int, algebra: str) -> list[dict]:
    kinds = {"matrix": ["matrix"], "block": ["block"], "shift": ["shift"],
             "all": ["matrix", "block", "shift"]}[algebra]
    alg = BlockTriangularAlgebra(2, 2)
    out = []
    for t in range(trials):
        kind = kinds[t % len(kinds)]
        q = _random_q(rng)
        if kind == "matrix":
            a, b = QMatrix.random(3, rng), QMatrix.random(3, rng)
        elif kind == "block":
            a, b = alg.random_element(rng), alg.random_element(rng)
        else:
            a, b = _random_shift(rng), _random_shift(rng)

        def run(a=a, b=b, q=q, kind=kind):
            res = verify_sum_identity(q, a, b)
            scale = (1.0 + a.norm() + b.norm()) ** 4
            return {"algebra": kind, "residual": res, "scale": scale, "passed": res < 1e-9 * scale}
        out.append(_instance(f"identity-e1[{t}]", run))
    return out


def _block_sum_pair(alg: BlockTriangularAlgebra, rng):
    """``a = [[D1, U1], [0, 0]]``, ``b = [[0, U2], [0, D2]]``: ``ba = 0`` and ``ab`` strictly upper."""
    a = alg.element(QMatrix.random(alg.k1, rng), alg.random_upper(rng), QMatrix.zeros(alg.k2))
    b = alg.element(QMatrix.zeros(alg.k1), alg.random_upper(rng), QMatrix.random(alg.k2, rng))
    return a, b


def _matrix_sum_pair(n: int, rng):
    """``a = P M P``, ``b = (1-P) N (1-P)`` for a random unitary block split: ``ab = ba = 0``."""
    from .qmat import random_unitary
    Uq = random_unitary(n, rng)
    k = n // 2
    Da = QMatrix.random(k, rng)
    Db = QMatrix.random(n - k, rng)
    Z1, Z2 = QMatrix.zeros(k), QMatrix.zeros(n - k)
    a = Uq @ BlockTriangularAlgebra(k, n - k).element(Da, None, Z2) @ Uq.star()
    b = Uq @ BlockTriangularAlgebra(k, n - k).element(Z1, None, Db) @ Uq.star()
    return a, b


def verify_sum(rng, trials: int, algebra: str, size: int) -> list[dict]:
    out = []
    for t in range(trials):
        if algebra == "block":
            alg = BlockTriangularAlgebra(max(1, size // 2), max(1, size - size // 2))
            a, b = _block_sum_pair(alg, rng)
            h = alg.projection()
        else:
            a, b = _matrix_sum_pair(max(2, size), rng)
            h = IdentityHomomorphism()
        out.append(_instance(f"sum[{t}]", lambda a=a, b=b, h=h: theorem_sum_spectra(h, a, b).to_json()))
    return out


def _random_invertible(n: int, rng) -> QMatrix:
    while True:
        A = QMatrix.random(n, rng)
        if is_invertible(A, tol=1e-3)[0]:
            return A


def verify_inverse(rng, trials: int, algebra: str, size: int) -> list[dict]:
    out = []
    for t in range(trials):
        if algebra == "block":
            alg = BlockTriangularAlgebra(max(1, size // 2), max(1, size - size // 2))
            a = alg.element(_random_invertible(alg.k1, rng), alg.random_upper(rng), _random_invertible(alg.k2, rng))
            h = alg.projection()
        else:
            a, h = _random_invertible(size, rng), IdentityHomomorphism()
        out.append(_instance(f"inverse[{t}]", lambda a=a, h=h: inverse_spectral_map(h, a).to_json()))
    return out


def _random_singular(n: int, rng) -> QMatrix:
    A = QMatrix.random(n, rng)
    a1, a2 = A.a1.copy(), A.a2.copy()
    a1[:, -1] = 0.0
    a2[:, -1] = 0.0
    return QMatrix(a1, a2)


def verify_product(rng, trials: int, algebra: str, size: int) -> list[dict]:
    out = []
    for t in range(trials):
        if algebra == "block":
            alg = BlockTriangularAlgebra(max(1, size // 2), max(1, size - size // 2))
            v1, v2 = alg.random_element(rng), alg.random_element(rng)
            h = alg.projection()
        else:
            v1 = _random_singular(size, rng) if t % 2 else QMatrix.random(size, rng)
            v2 = QMatrix.random(size, rng)
            h = IdentityHomomorphism()
        out.append(_instance(f"product[{t}]",
                             lambda v1=v1, v2=v2, h=h: product_spectra_off_imaginaries(h, v1, v2).to_json()))
    return out


def verify_boundary(rng, trials: int, size: int) -> list[dict]:
    out = []
    for t in range(trials):
        a = _random_invertible(size, rng)

        def run(a=a):
            rep = inversion_of_boundary(a).to_json()
            bs = boundary_s_spectrum(a)
            rep["certified_spheres"] = len(bs.extra["certificates"])
            return rep
        out.append(_instance(f"boundary[{t}]", run))
    return out


def verify_shift_boundary(q: Quaternion, ns: list[int], trials: int, rng) -> list[dict]:
    out = []
    prev = None
    for n in ns:
        def run(n=n):
            w = shiftlab.boundary_witness_r(q, n, trials=trials, rng=rng).to_json()
            w["passed"] = bool(w["within_bound"] and w["invertible"])
            return w
        rec = _instance(f"shift-boundary[n={n}]", run)
        if prev is not None and "distance" in rec:
            rec["decreasing"] = rec["distance"] < prev
            rec["passed"] = rec["passed"] and rec["decreasing"]
        prev = rec.get("distance", prev)
        out.append(rec)
    return out


def cmd_verify(args) -> int:
    suite = args.suite
    if args.trials < 1:
        raise InputError("--trials must be positive")
    if args.size < 2:
        raise InputError("--size must be at least 2")
    rng = np.random.default_rng(args.seed)
    options = {"suite": suite, "trials": args.trials, "algebra": args.algebra, "size": args.size}
    if suite == "identity-e1":
        results = verify_identity(rng, args.trials, args.algebra or "all")
    elif suite == "sum":
        results = verify_sum(rng, args.trials, args.algebra or "block", args.size)
    elif suite == "inverse":
        results = verify_inverse(rng, args.trials, args.algebra or "matrix", args.size)
    elif suite == "product":
        results = verify_product(rng, args.trials, args.algebra or "matrix", args.size)
    elif suite == "boundary":
        results = verify_boundary(rng, args.trials, args.size)
    else:
        q = parse_quaternion(args.q or "0.5")
        ns = parse_range(args.n or "1..10")
        options.update(q=q.to_list(), n=ns)
        results = verify_shift_boundary(q, ns, args.trials, rng)
    cfg = _cfg(args, **options)
    passed = all(r.get("passed") for r in results)
    _emit(args, render_json(cfg, {"suite": suite, "passed": passed,
                                  "count": len(results), "failures": sum(not r.get("passed") for r in results),
                                  "instances": results}))
    return EXIT_OK if passed else EXIT_FAIL


# shift --------------------------------------------------------------------------

def cmd_shift_spectrum(args) -> int:
    op = load_op(args.op, args.power)
    grid = _grid(args.grid)
    cfg = _cfg(args, [args.op], power=args.power)
    res = shiftlab.weyl_s_spectrum_shift(op, grid)
    if args.out == "csv":
        _emit(args, render_csv(cfg, res.to_csv()))
    else:
        rows = []
        F, W = res.in_fredholm_spectrum, res.in_weyl_spectrum
        for a, u in enumerate(res.u):
            for b, r in enumerate(res.r):
                rows.append({"u": float(u), "r": float(r), "fredholm_spectrum": bool(F[a, b]),
                             "weyl_spectrum": bool(W[a, b]), "index": int(res.index[a, b])})
        _emit(args, render_json(cfg, {"kind": "WeylS", "grid": rows, "excluded": "none"}))
    return EXIT_OK


def cmd_shift_index(args) -> int:
    op = load_op(args.op, args.power)
    cfg = _cfg(args, [args.op], power=args.power, q=args.q)
    target = op.spherical(parse_quaternion(args.q)) if args.q else op
    try:
        result = shiftlab.index(target).to_json()
    except NotFredholmError as exc:
        result = {"fredholm": False, "reason": str(exc)}
    _emit(args, render_json(cfg, result))
    return EXIT_OK


def cmd_shift_boundary(args) -> int:
    q = parse_quaternion(args.q or "0.5")
    ns = parse_range(args.n or "1..10")
    rng = np.random.default_rng(args.seed)
    cfg = _cfg(args, q=q.to_list(), n=ns, trials=args.trials)
    rows = [shiftlab.boundary_witness_r(q, n, trials=args.trials, rng=rng).to_json() for n in ns]
    if args.out == "csv":
        body = "n,distance,bound,inverse_residual\n" + "".join(
            f"{r['n']},{r['distance']:.12g},{r['bound']:.12g},{r['inverse_residual']:.3g}\n" for r in rows)
        _emit(args, render_csv(cfg, body))
    else:
        _emit(args, render_json(cfg, {"witnesses": rows}))
    return EXIT_OK


def cmd_shift_residual(args) -> int:
    op = load_op(args.op, args.power)
    q = parse_quaternion(args.q or "0")
    ns = parse_range(args.n or "10,20,40")
    cfg = _cfg(args, [args.op], q=q.to_list(), N=ns)
    rows = [{"N": N, "residual": shiftlab.approx_s_spectrum_residual(op, q, N)} for N in ns]
    _emit(args, render_json(cfg, {"residuals": rows}))
    return EXIT_OK


# parser ---------------------------------------------------------------------------

def _common(p, out=True):
    p.add_argument("-o", "--output", help="write the report here instead of stdout")
    if out:
        p.add_argument("--out", choices=("json", "csv"), default="json", help="output format")


def _matrix_cmd(sub, name, func, help_):
    p = sub.add_parser(name, help=help_)
    p.add_argument("matrix", help="matrix JSON file {\"n\": n, \"entries\": [[[w,x,y,z], ...], ...]}")
    p.add_argument("--tol", type=float, default=None, help="invertibility tolerance")
    p.add_argument("--sphere-tol", type=float, default=SPHERE_TOL, help="sphere de-duplication tolerance")
    _common(p)
    p.set_defaults(func=func, command_path=name)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sspectrum", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    _matrix_cmd(sub, "spectrum", cmd_spectrum, "exact S-spectrum of a matrix")
    p = _matrix_cmd(sub, "scan", cmd_scan, "sigma_min(R_q(A)) over a (u, r) grid")
    p.add_argument("--grid", required=True, help="u0,u1,r1,step")
    p = _matrix_cmd(sub, "resolvent", cmd_resolvent, "Cauchy series residuals per N")
    p.add_argument("--q", required=True, help="w or w,x,y,z")
    p.add_argument("--N", type=int, default=60)
    for name, func in (("fredholm-spectrum", cmd_fredholm_spectrum), ("weyl-spectrum", cmd_weyl_spectrum)):
        p = _matrix_cmd(sub, name, func, f"{name.split('-')[0]} S-spectrum relative to a homomorphism")
        p.add_argument("--hom", choices=("identity", "block"), default="identity")
        p.add_argument("--k1", type=int, default=None, help="size of the first diagonal block")
        p.add_argument("--exclude", choices=("none", "zero", "Hp0"), default="none")
    p = _matrix_cmd(sub, "boundary-spectrum", cmd_boundary_spectrum, "certified boundary S-spectrum")
    p.add_argument("--eps", type=float, default=1e-6)

    p = sub.add_parser("verify", help="randomised theorem checks")
    p.add_argument("suite", choices=VERIFY_SUITES)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--algebra", choices=("matrix", "block", "shift", "all"), default=None)
    p.add_argument("--size", type=int, default=3, help="matrix size")
    p.add_argument("--q", default=None, help="shift-boundary: base quaternion")
    p.add_argument("--n", default=None, help="shift-boundary: exponents, e.g. 1..10")
    _common(p, out=False)
    p.set_defaults(func=cmd_verify, command_path="verify")

    p = sub.add_parser("shift", help="shift-plus-finite-rank operator experiments")
    ssub = p.add_subparsers(dest="shift_command", required=True)
    for name, func, help_ in (("spectrum", cmd_shift_spectrum, "Calkin/Weyl S-spectrum on a grid"),
                              ("index", cmd_shift_index, "Fredholm index of op^power (or R_q of it)"),
                              ("boundary", cmd_shift_boundary, "R_n = (R + T q^n)^2 witnesses"),
                              ("residual", cmd_shift_residual, "approximate S-spectrum residuals")):
        s = ssub.add_parser(name, help=help_)
        s.add_argument("--op", default="R", help=f"{', '.join(shiftlab.NAMED_OPS)} or an operator JSON file")
        s.add_argument("--power", type=int, default=1)
        s.add_argument("--grid", default=None, help="u0,u1,r1,step")
        s.add_argument("--q", default=None)
        s.add_argument("--n", default=None, help="integers: 5, 1..10 or 1,3,5")
        s.add_argument("--trials", type=int, default=100)
        s.add_argument("--seed", type=int, default=0)
        _common(s)
        s.set_defaults(func=func, command_path=f"shift {name}")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, DomainError) as exc:
        print(f"sspectrum: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericError, InstabilityError, SpectralPointError, DivergenceError, NotFredholmError,
            PreconditionError, UnsupportedOperationError, np.linalg.LinAlgError) as exc:
        print(f"sspectrum: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SSpectrumError as exc:  # pragma: no cover - safety net
        print(f"sspectrum: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
