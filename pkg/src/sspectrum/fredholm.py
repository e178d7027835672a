"""Fredholm, Weyl and boundary S-spectra relative to an algebra homomorphism.

Elements are duck-typed (see :class:`AlgebraElement`): :class:`QMatrix` and
:class:`sspectrum.shiftlab.ShiftOp` both qualify. A :class:`Homomorphism`
maps a source algebra into a target algebra and carries the decision
procedures for Fredholm elements (image invertible) and Weyl elements
(invertible plus something in the kernel).

Three matrix instances are provided: the identity map, the block-diagonal
projection on block upper-triangular matrices (kernel = strictly upper
blocks), and a basis permutation (an isomorphism).
"""
from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from .errors import (
    DomainError,
    PreconditionError,
    SpectralPointError,
    UnsupportedOperationError,
)
from .qmat import (
    QMatrix,
    char_elem,
    inverse,
    is_invertible,
    op_norm,
    s_spectrum_exact,
    sigma_min,
)
from .quat import (
    Quaternion,
    Sphere,
    dedupe_spheres,
    hausdorff,
    is_subset,
    sample_sphere,
    sphere_sets_match,
    without_purely_imaginary,
    without_zero,
)

SET_TOL = 1e-7


@runtime_checkable
class AlgebraElement(Protocol):
    """What the harness needs from an element of a two-sided Banach algebra.

    ``x + y``, ``x - y``, ``x @ y`` (product), ``q * x`` / ``x * q`` (left and
    right scalar actions), ``x + r`` for real ``r`` (adds ``r`` times the unit),
    and ``x.norm()``.
    """

    def __add__(self, other): ...
    def __matmul__(self, other): ...
    def __mul__(self, q): ...
    def __rmul__(self, q): ...
    def norm(self) -> float: ...


def spherical(v, q):
    """``R_q(v) = v^2 - 2 Re(q) v + |q|^2 1`` for any algebra element."""
    q = Quaternion.coerce(q)
    return v @ v - v * (2.0 * q.re) + q.norm2()


# homomorphisms ---------------------------------------------------------------

class Homomorphism(ABC):
    """Unital two-sided algebra homomorphism with Fredholm/Weyl decisions."""

    name = "homomorphism"

    @abstractmethod
    def __call__(self, v):
        """Image of ``v`` in the target algebra."""

    @abstractmethod
    def in_kernel(self, v, tol: float = 1e-10) -> bool:
        ...

    def is_fredholm(self, v) -> bool:
        return is_invertible(self(v))[0]

    def is_weyl(self, v) -> bool:
        raise UnsupportedOperationError(f"{self.name} has no Weyl decision procedure")



def unit_like(v):
    """Unit of the algebra that contains ``v``."""
    return v * 0.0 + 1.0


def zero_like(v):
    return v * 0.0


class IdentityHomomorphism(Homomorphism):
    """``A = id`` on n x n quaternionic matrices: Fredholm = Weyl = invertible."""

    name = "identity"

    def __call__(self, v):
        return v

    def in_kernel(self, v, tol=1e-10):
        return op_norm(v) <= tol

    def is_weyl(self, v):
        return is_invertible(v)[0]


class BlockTriangularAlgebra:
    """Quaternionic matrices ``[[D1, U], [0, D2]]`` with ``D1`` k1 x k1, ``D2`` k2 x k2."""

    def __init__(self, k1: int, k2: int):
        if k1 < 1 or k2 < 1:
            raise DomainError("block sizes must be positive")
        self.k1, self.k2 = k1, k2

    @property
    def n(self) -> int:
        return self.k1 + self.k2

    def element(self, D1: QMatrix, U, D2: QMatrix) -> QMatrix:
        if D1.n != self.k1 or D2.n != self.k2:
            raise DomainError("diagonal blocks have the wrong size")
        a1 = np.zeros((self.n, self.n), complex)
        a2 = np.zeros((self.n, self.n), complex)
        a1[:self.k1, :self.k1], a2[:self.k1, :self.k1] = D1.a1, D1.a2
        a1[self.k1:, self.k1:], a2[self.k1:, self.k1:] = D2.a1, D2.a2
        if U is not None:
            u1, u2 = U
            a1[:self.k1, self.k1:], a2[:self.k1, self.k1:] = u1, u2
        return QMatrix(a1, a2)

    def blocks(self, v: QMatrix):
        """Return ``(D1, (U1, U2), D2, lower_left_max)``."""
        k = self.k1
        D1 = QMatrix(v.a1[:k, :k], v.a2[:k, :k])
        D2 = QMatrix(v.a1[k:, k:], v.a2[k:, k:])
        U = (v.a1[:k, k:], v.a2[:k, k:])
        lower = float(max(np.abs(v.a1[k:, :k]).max(), np.abs(v.a2[k:, :k]).max()))
        return D1, U, D2, lower

    def contains(self, v: QMatrix, tol: float = 1e-12) -> bool:
        return v.n == self.n and self.blocks(v)[3] <= tol

    def random_upper(self, rng: np.random.Generator, scale: float = 1.0):
        shape = (self.k1, self.k2)
        return (rng.normal(scale=scale / 2, size=shape) + 1j * rng.normal(scale=scale / 2, size=shape),
                rng.normal(scale=scale / 2, size=shape) + 1j * rng.normal(scale=scale / 2, size=shape))

    def random_element(self, rng: np.random.Generator, scale: float = 1.0) -> QMatrix:
        return self.element(QMatrix.random(self.k1, rng, scale), self.random_upper(rng, scale),
                            QMatrix.random(self.k2, rng, scale))

    def random_kernel_element(self, rng: np.random.Generator, scale: float = 1.0) -> QMatrix:
        return self.element(QMatrix.zeros(self.k1), self.random_upper(rng, scale), QMatrix.zeros(self.k2))

    def projection(self) -> "BlockDiagonalProjection":
        return BlockDiagonalProjection(self)


class BlockDiagonalProjection(Homomorphism):
    """Kill the off-diagonal block: ``[[D1, U], [0, D2]] -> [[D1, 0], [0, D2]]``."""

    name = "block"

    def __init__(self, algebra: BlockTriangularAlgebra):
        self.algebra = algebra

    def __call__(self, v):
        D1, _, D2, lower = self.algebra.blocks(v)
        if lower > 1e-9 * max(1.0, op_norm(v)):
            raise DomainError("element is not block upper-triangular")
        return self.algebra.element(D1, None, D2)

    def in_kernel(self, v, tol=1e-10):
        D1, _, D2, lower = self.algebra.blocks(v)
        return max(op_norm(D1), op_norm(D2), lower) <= tol

    def is_weyl(self, v):
        # v + c (c strictly upper) keeps D1, D2; block-triangular invertibility
        # needs both diagonal blocks invertible, and then c = 0 already works.
        D1, _, D2, _ = self.algebra.blocks(v)
        return is_invertible(D1)[0] and is_invertible(D2)[0]


class BasisPermutation(Homomorphism):
    """Algebra isomorphism ``v -> P v P^T`` for a permutation matrix ``P``."""

    name = "permutation"

    def __init__(self, perm: Sequence[int]):
        self.perm = np.asarray(perm)
        if sorted(self.perm.tolist()) != list(range(len(self.perm))):
            raise DomainError("not a permutation")

    def __call__(self, v):
        p = self.perm
        return QMatrix(v.a1[np.ix_(p, p)], v.a2[np.ix_(p, p)])

    def inverse_map(self, w):
        inv = np.argsort(self.perm)
        return QMatrix(w.a1[np.ix_(inv, inv)], w.a2[np.ix_(inv, inv)])

    def in_kernel(self, v, tol=1e-10):
        return op_norm(v) <= tol

    def is_weyl(self, v):
        return is_invertible(v)[0]


def is_fredholm_element(h: Homomorphism, v) -> bool:
    return h.is_fredholm(v)


def is_weyl_element(h: Homomorphism, v) -> bool:
    return h.is_weyl(v)


# reports -----------------------------------------------------------------------

@dataclass
class SpectrumReport:
    kind: str  # "S", "FredholmS", "WeylS", "BoundaryS"
    spheres: list[Sphere]
    excluded: str = "none"  # "none", "zero", "Hp0"
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {"kind": self.kind, "spheres": [s.to_dict() for s in self.spheres],
               "excluded": self.excluded}
        out.update(self.extra)
        return out

    def excluding(self, what: str) -> "SpectrumReport":
        if what == "zero":
            return SpectrumReport(self.kind, without_zero(self.spheres), "zero", dict(self.extra))
        if what == "Hp0":
            return SpectrumReport(self.kind, without_purely_imaginary(self.spheres), "Hp0", dict(self.extra))
        if what == "none":
            return self
        raise DomainError(f"unknown exclusion {what!r}")


@dataclass
class ComparisonReport:
    name: str
    passed: bool
    lhs: list[Sphere]
    rhs: list[Sphere]
    distance: float
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"name": self.name, "passed": self.passed, "distance": self.distance,
                "lhs": [s.to_dict() for s in self.lhs], "rhs": [s.to_dict() for s in self.rhs],
                **self.details}


def _compare(name, lhs, rhs, tol, **details) -> ComparisonReport:
    return ComparisonReport(name, sphere_sets_match(lhs, rhs, tol), lhs, rhs, hausdorff(lhs, rhs), details)


# spectra -----------------------------------------------------------------------

def s_spectrum(v: QMatrix) -> SpectrumReport:
    return SpectrumReport("S", s_spectrum_exact(v))


def fredholm_s_spectrum(h: Homomorphism, v) -> SpectrumReport:
    """S-spectrum of the image ``h(v)``."""
    return SpectrumReport("FredholmS", s_spectrum_exact(h(v)))


def weyl_s_spectrum(h: Homomorphism, v: QMatrix, samples: int = 4) -> SpectrumReport:
    """Spheres ``[q]`` with ``R_q(v)`` not a Weyl element.

    Weyl elements contain the invertibles, so only spheres of ``sigma_S(v)``
    are candidates; each is decided on ``samples`` members.
    """
    out = []
    disagreements = 0
    for s in s_spectrum_exact(v):
        votes = [not h.is_weyl(char_elem(v, p)) for p in sample_sphere(s, samples)]
        if any(votes):
            out.append(s)
        if any(votes) and not all(votes):
            disagreements += 1
    return SpectrumReport("WeylS", out, extra={"axial_disagreements": disagreements})


def sandwich_holds(h: Homomorphism, v: QMatrix, tol: float = SET_TOL) -> bool:
    """``sigma^Phi(v) <= sigma^Phi0(v) <= sigma_S(v)`` as sphere sets."""
    f = fredholm_s_spectrum(h, v).spheres
    w = weyl_s_spectrum(h, v).spheres
    s = s_spectrum_exact(v)
    return is_subset(f, w, tol) and is_subset(w, s, tol)


# identities and theorem harnesses -------------------------------------------------

def _norm(x) -> float:
    return x.norm()


def sum_identity_terms(q, a, b):
    """Both sides of ``R_q(b) R_q(a) / |q|^2 = R_q(a+b) - ab - ba + (...) / |q|^2``."""
    q = Quaternion.coerce(q)
    m2 = q.norm2()
    if m2 == 0.0:
        raise DomainError("the sum identity needs q != 0")
    t = 2.0 * q.re
    lhs = (spherical(b, q) @ spherical(a, q)) * (1.0 / m2)
    b2, a2, ba = b @ b, a @ a, b @ a
    tail = (b2 @ a2) - ((b2 @ a) + (b @ a2) - ba * t) * t
    rhs = spherical(a + b, q) - (a @ b) - ba + tail * (1.0 / m2)
    return lhs, rhs


def verify_sum_identity(q, a, b) -> float:
    """Norm of the difference of the two sides of the sum identity (an exact algebraic identity)."""
    lhs, rhs = sum_identity_terms(q, a, b)
    return _norm(lhs - rhs)


def verify_sum_identity_mirror(q, a, b) -> float:
    """Same identity with the roles of ``a`` and ``b`` exchanged."""
    return verify_sum_identity(q, b, a)


def theorem_sum_spectra(h: Homomorphism, a: QMatrix, b: QMatrix, tol: float = SET_TOL,
                        check_hypothesis: bool = True) -> ComparisonReport:
    """Union law ``sigma^Phi(a+b) \\ {0} = [sigma^Phi(a) u sigma^Phi(b)] \\ {0}``.

    Requires ``ab`` and ``ba`` in the kernel of ``h``. When ``h`` supports
    Weyl decisions the inclusion for Weyl spectra is checked too, and the
    equality whenever ``sigma^Phi0(a) = sigma^Phi(a)``.
    """
    if check_hypothesis and not (h.in_kernel(a @ b) and h.in_kernel(b @ a)):
        raise PreconditionError("theorem needs ab and ba in the kernel of the homomorphism")
    lhs = without_zero(fredholm_s_spectrum(h, a + b).spheres)
    fa = fredholm_s_spectrum(h, a).spheres
    fb = fredholm_s_spectrum(h, b).spheres
    rhs = without_zero(dedupe_spheres(fa + fb, tol))
    report = _compare("sum", lhs, rhs, tol)
    try:
        wab = without_zero(weyl_s_spectrum(h, a + b).spheres)
        wa = weyl_s_spectrum(h, a).spheres
        wb = weyl_s_spectrum(h, b).spheres
    except UnsupportedOperationError:
        report.details["weyl"] = "unsupported"
        return report
    wrhs = without_zero(dedupe_spheres(wa + wb, tol))
    inclusion = is_subset(wab, wrhs, tol)
    report.details["weyl_inclusion"] = inclusion
    passed = report.passed and inclusion
    if sphere_sets_match(wa, fa, tol):
        eq = sphere_sets_match(wab, wrhs, tol)
        report.details["weyl_equality"] = eq
        passed = passed and eq
    report.passed = passed
    return report


def search_sum_counterexamples(h: Homomorphism, make_pair, trials: int, rng: np.random.Generator,
                               tol: float = SET_TOL) -> list[ComparisonReport]:
    """Run the union law on pairs that need not satisfy the kernel hypothesis.

    ``make_pair(rng)`` returns ``(a, b)``. Nothing is asserted; every report is
    returned with ``details["hypothesis"]`` recording whether ``ab, ba`` were in
    the kernel.
    """
    out = []
    for _ in range(trials):
        a, b = make_pair(rng)
        rep = theorem_sum_spectra(h, a, b, tol, check_hypothesis=False)
        rep.details["hypothesis"] = bool(h.in_kernel(a @ b) and h.in_kernel(b @ a))
        out.append(rep)
    return out


def _require_invertible(a: QMatrix) -> None:
    ok, smin = is_invertible(a)
    if not ok:
        raise DomainError(f"element is not invertible (sigma_min = {smin:.3g})")


def inverse_spectral_map(h: Homomorphism, a: QMatrix, tol: float = SET_TOL) -> ComparisonReport:
    """``sigma^Phi(a^{-1}) = {conj(q)/|q|^2 : q in sigma^Phi(a)}`` (and Weyl when available)."""
    _require_invertible(a)
    ainv = inverse(a)
    lhs = fredholm_s_spectrum(h, ainv).spheres
    rhs = dedupe_spheres([s.reciprocal() for s in fredholm_s_spectrum(h, a).spheres], tol)
    report = _compare("inverse", lhs, rhs, tol)
    try:
        wl = weyl_s_spectrum(h, ainv).spheres
        wr = dedupe_spheres([s.reciprocal() for s in weyl_s_spectrum(h, a).spheres], tol)
    except UnsupportedOperationError:
        return report
    report.details["weyl_match"] = sphere_sets_match(wl, wr, tol)
    report.passed = report.passed and report.details["weyl_match"]
    return report


def product_spectra_off_imaginaries(h: Homomorphism, v1: QMatrix, v2: QMatrix,
                                    tol: float = SET_TOL) -> ComparisonReport:
    """``sigma^Phi(v1 v2) \\ H_p0 = sigma^Phi(v2 v1) \\ H_p0`` with ``H_p0 = {q != 0 : Re q = 0}``."""
    lhs = without_purely_imaginary(fredholm_s_spectrum(h, v1 @ v2).spheres, tol)
    rhs = without_purely_imaginary(fredholm_s_spectrum(h, v2 @ v1).spheres, tol)
    return _compare("product", lhs, rhs, tol)


def boundary_inclusion(h: Homomorphism, a: QMatrix, tol: float = SET_TOL) -> ComparisonReport:
    """Check ``d sigma_S(a) <= d sigma^Phi(a)`` for matrix elements.

    A finite union of spheres has empty interior in H, so each of these sets
    is its own boundary and the check is a sphere-set inclusion.
    """
    s = s_spectrum_exact(a)
    f = fredholm_s_spectrum(h, a).spheres
    return ComparisonReport("boundary-inclusion", is_subset(s, f, tol), s, f, hausdorff(s, f))


def out_of_ball_fredholm(h: Homomorphism, v: QMatrix, q) -> bool:
    """For ``|q| > ||h(v)||`` the element ``R_q(v)`` must be Fredholm."""
    q = Quaternion.coerce(q)
    if not q.norm() > op_norm(h(v)):
        raise PreconditionError("needs |q| > ||A(v)||")
    return h.is_fredholm(char_elem(v, q))


# boundary S-spectrum ------------------------------------------------------------

def _certify_invertible(M: QMatrix) -> bool:
    """sigma_min well above the SVD backward error and ``||M X - I|| < 1`` (Neumann) with margin."""
    X = M.chi()
    s = np.linalg.svd(X, compute_uv=False)
    if not s[-1] > 1e3 * X.shape[0] * np.finfo(float).eps * max(1.0, s[0]):
        return False
    resid = np.linalg.norm(X @ np.linalg.inv(X) - np.eye(X.shape[0]), 2)
    return bool(resid <= 1e-3)


def boundary_s_spectrum(v, eps: float = 1e-6) -> SpectrumReport:
    """Boundary S-spectrum of a matrix.

    Invertible matrices are dense, so every singular ``R_q(v)`` is a limit of
    invertibles and the boundary S-spectrum equals ``sigma_S(v)``. Each sphere
    is certified by an explicit invertible ``R_q(v) + delta I`` with
    ``|delta| < eps``.
    """
    if not isinstance(v, QMatrix):
        raise UnsupportedOperationError(
            f"no boundary-membership procedure for {type(v).__name__}; "
            "for shift operators use shiftlab.boundary_witness_r")
    certs = []
    for s in s_spectrum_exact(v):
        R = char_elem(v, s.representative())
        for delta in (eps / 2, -eps / 2, eps / 3, -eps / 3, eps / 5):
            if _certify_invertible(R + delta):
                certs.append({"sphere": s.to_dict(), "delta": delta})
                break
        else:
            raise PreconditionError(f"could not certify sphere {s} as a limit of invertibles")
    spheres = [Sphere.from_dict(c["sphere"]) for c in certs]
    return SpectrumReport("BoundaryS", spheres, extra={"certificates": certs})


def inversion_of_boundary(v: QMatrix, tol: float = SET_TOL) -> ComparisonReport:
    """``B(v^{-1}) = {conj(q)/|q|^2 : q in B(v)}``."""
    _require_invertible(v)
    lhs = boundary_s_spectrum(inverse(v)).spheres
    rhs = dedupe_spheres([s.reciprocal() for s in boundary_s_spectrum(v).spheres], tol)
    return _compare("boundary-inverse", lhs, rhs, tol)


# approximate null sequences ------------------------------------------------------

@dataclass
class NullSequence:
    left: list[float]
    right: list[float]
    bounds: list[float]
    inverse_norms: list[float]

    def within_bounds(self, slack: float = 1e-12) -> bool:
        return all(l <= b + slack and r <= b + slack
                   for l, r, b in zip(self.left, self.right, self.bounds))


def approx_null_sequence(a: QMatrix, q, qs: Sequence, tol: float = 1e-6) -> NullSequence:
    """Residuals ``||R_q(a) b_n||``, ``||b_n R_q(a)||`` for ``b_n = R_{q_n}(a)^{-1} / ||.||``.

    ``bounds[n]`` is ``1/||R_{q_n}(a)^{-1}|| + 2 ||a|| |Re(q_n - q)| + ||q|^2 - |q_n|^2|``.
    """
    q = Quaternion.coerce(q)
    Rq = char_elem(a, q)
    scale = max(1.0, op_norm(a)) ** 2
    if sigma_min(Rq) > tol * scale:
        raise PreconditionError(f"q = {q} is not in the S-spectrum")
    na = op_norm(a)
    left, right, bounds, inv_norms = [], [], [], []
    for qn in qs:
        qn = Quaternion.coerce(qn)
        Rn = char_elem(a, qn)
        ok, smin = is_invertible(Rn)
        if not ok:
            raise SpectralPointError(f"q_n = {qn} lies on the S-spectrum", qn, smin)
        Rinv = inverse(Rn)
        ninv = op_norm(Rinv)
        b = Rinv / ninv
        left.append(op_norm(Rq @ b))
        right.append(op_norm(b @ Rq))
        bounds.append(1.0 / ninv + na * 2.0 * abs(qn.re - q.re) + abs(q.norm2() - qn.norm2()))
        inv_norms.append(ninv)
    return NullSequence(left, right, bounds, inv_norms)
