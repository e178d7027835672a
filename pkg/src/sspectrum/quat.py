"""Quaternion arithmetic, imaginary units, slices and axially symmetric spheres.

A quaternion ``q = w + x i + y j + z k`` is stored as four 64-bit floats. The
Hamilton product follows ``ij = -ji = k``, ``jk = -kj = i``, ``ki = -ik = j``.

Spheres ``[q] = {Re(q) + I |Im(q)| : I imaginary unit}`` are the building
blocks of every S-spectrum in this package; they are encoded by the pair
``(re, rad)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import DomainError

SPHERE_TOL = 1e-9


@dataclass(frozen=True)
class Quaternion:
    w: float = 0.0
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0

    def __post_init__(self):
        for name in ("w", "x", "y", "z"):
            object.__setattr__(self, name, float(getattr(self, name)))

    # construction -----------------------------------------------------
    @classmethod
    def coerce(cls, value) -> "Quaternion":
        """Accept a Quaternion, a real number, a complex number (in C_i) or a 4-sequence."""
        if isinstance(value, Quaternion):
            return value
        if isinstance(value, complex):
            return cls(value.real, value.imag)
        if isinstance(value, (int, float)):
            return cls(value)
        if hasattr(value, "__len__") and len(value) == 4:
            return cls(*value)
        # numpy scalars
        try:
            return cls(float(value))
        except (TypeError, ValueError):
            raise TypeError(f"cannot interpret {value!r} as a quaternion") from None

    @classmethod
    def from_complex_pair(cls, c1: complex, c2: complex) -> "Quaternion":
        """Inverse of :meth:`complex_pair`: ``q = c1 + c2 j`` with ``c1, c2`` in C_i."""
        return cls(c1.real, c1.imag, c2.real, c2.imag)

    def complex_pair(self) -> tuple[complex, complex]:
        """Split ``q = c1 + c2 j`` with ``c1 = w + x i`` and ``c2 = y + z i``."""
        return complex(self.w, self.x), complex(self.y, self.z)

    def to_list(self) -> list[float]:
        return [self.w, self.x, self.y, self.z]

    # basic quantities -------------------------------------------------
    @property
    def re(self) -> float:
        return self.w

    @property
    def im(self) -> "Quaternion":
        return Quaternion(0.0, self.x, self.y, self.z)

    def im_norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def norm2(self) -> float:
        return self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z

    def norm(self) -> float:
        return math.sqrt(self.norm2())

    __abs__ = norm

    def conj(self) -> "Quaternion":
        return Quaternion(self.w, -self.x, -self.y, -self.z)

    def inverse(self) -> "Quaternion":
        return inverse(self)

    def is_real(self, tol: float = 0.0) -> bool:
        return self.im_norm() <= tol

    # arithmetic -------------------------------------------------------
    def __add__(self, other):
        o = _coerce_or_none(other)
        if o is None:
            return NotImplemented
        return Quaternion(self.w + o.w, self.x + o.x, self.y + o.y, self.z + o.z)

    __radd__ = __add__

    def __sub__(self, other):
        o = _coerce_or_none(other)
        if o is None:
            return NotImplemented
        return Quaternion(self.w - o.w, self.x - o.x, self.y - o.y, self.z - o.z)

    def __rsub__(self, other):
        o = _coerce_or_none(other)
        if o is None:
            return NotImplemented
        return o - self

    def __neg__(self):
        return Quaternion(-self.w, -self.x, -self.y, -self.z)

    def __mul__(self, other):
        o = _coerce_or_none(other)
        if o is None:
            return NotImplemented
        return mul(self, o)

    def __rmul__(self, other):
        o = _coerce_or_none(other)
        if o is None:
            return NotImplemented
        return mul(o, self)

    def __truediv__(self, other):
        # only real divisors: quaternion division is side dependent
        if isinstance(other, (int, float)):
            return Quaternion(self.w / other, self.x / other, self.y / other, self.z / other)
        return NotImplemented

    def __pow__(self, n: int):
        if not isinstance(n, int):
            return NotImplemented
        if n < 0:
            return inverse(self) ** (-n)
        out = ONE
        for _ in range(n):
            out = out * self
        return out

    def isclose(self, other, tol: float = 1e-12) -> bool:
        return (self - Quaternion.coerce(other)).norm() <= tol

    def __repr__(self):
        return f"Quaternion({self.w!r}, {self.x!r}, {self.y!r}, {self.z!r})"


def _coerce_or_none(value):
    if isinstance(value, (Quaternion, int, float, complex)):
        return Quaternion.coerce(value)
    return None


ONE = Quaternion(1.0)
ZERO = Quaternion()
I = Quaternion(0.0, 1.0)
J = Quaternion(0.0, 0.0, 1.0)
K = Quaternion(0.0, 0.0, 0.0, 1.0)


def mul(a: Quaternion, b: Quaternion) -> Quaternion:
    """Hamilton product ``a b``."""
    return Quaternion(
        a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
        a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
        a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
        a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
    )


def inverse(q: Quaternion) -> Quaternion:
    """Return ``conj(q) / |q|^2``; raises :class:`DomainError` for ``q == 0``."""
    n2 = q.norm2()
    if n2 == 0.0:
        raise DomainError("the zero quaternion has no inverse")
    return Quaternion(q.w / n2, -q.x / n2, -q.y / n2, -q.z / n2)


def is_imaginary_unit(q: Quaternion, tol: float = 1e-12) -> bool:
    return abs(q.w) <= tol and abs(q.norm() - 1.0) <= tol


def imaginary_unit(x: float, y: float, z: float) -> Quaternion:
    """Normalise the vector ``x i + y j + z k`` to an element of the unit sphere S."""
    n = math.sqrt(x * x + y * y + z * z)
    if n == 0.0:
        raise DomainError("the zero vector does not define an imaginary unit")
    return Quaternion(0.0, x / n, y / n, z / n)


def slice_decompose(q: Quaternion) -> tuple[float, float, Quaternion]:
    """Write ``q = re + axis * im_norm`` with ``axis`` an imaginary unit.

    For real ``q`` any axis works; ``i`` is returned so the output is
    deterministic.
    """
    r = q.im_norm()
    if r == 0.0:
        return q.w, 0.0, I
    return q.w, r, Quaternion(0.0, q.x / r, q.y / r, q.z / r)


@dataclass(frozen=True)
class Sphere:
    """The 2-sphere ``[re + I rad]``; ``rad == 0`` encodes a real point."""

    re: float
    rad: float

    def __post_init__(self):
        if self.rad < 0:
            raise DomainError(f"sphere radius must be non-negative, got {self.rad}")
        object.__setattr__(self, "re", float(self.re))
        object.__setattr__(self, "rad", float(self.rad))

    def contains(self, q: Quaternion, tol: float = SPHERE_TOL) -> bool:
        q = Quaternion.coerce(q)
        return abs(q.w - self.re) <= tol and abs(q.im_norm() - self.rad) <= tol

    def isclose(self, other: "Sphere", tol: float = SPHERE_TOL) -> bool:
        return abs(self.re - other.re) <= tol and abs(self.rad - other.rad) <= tol

    def distance(self, other: "Sphere") -> float:
        return max(abs(self.re - other.re), abs(self.rad - other.rad))

    def representative(self) -> Quaternion:
        return Quaternion(self.re, self.rad)

    @property
    def modulus(self) -> float:
        """``|q|`` shared by every member of the sphere."""
        return math.hypot(self.re, self.rad)

    def is_zero(self, tol: float = SPHERE_TOL) -> bool:
        return abs(self.re) <= tol and self.rad <= tol

    def is_purely_imaginary(self, tol: float = SPHERE_TOL) -> bool:
        """Membership in ``{q != 0 : Re q = 0}``."""
        return abs(self.re) <= tol and self.rad > tol

    def reciprocal(self) -> "Sphere":
        """Image of the sphere under ``q -> conj(q)/|q|^2``."""
        m2 = self.re * self.re + self.rad * self.rad
        if m2 == 0.0:
            raise DomainError("the zero sphere has no reciprocal")
        return Sphere(self.re / m2, self.rad / m2)

    def to_dict(self) -> dict:
        return {"re": self.re, "rad": self.rad}

    @classmethod
    def from_dict(cls, d: dict) -> "Sphere":
        return cls(d["re"], d["rad"])


def sphere_of(q) -> Sphere:
    q = Quaternion.coerce(q)
    return Sphere(q.w, q.im_norm())


def sample_sphere(s: Sphere, count: int) -> list[Quaternion]:
    """Return ``count`` members of ``s``.

    The first two are always ``re + i rad`` and ``re - i rad``; the rest use
    a Fibonacci lattice on the unit sphere of imaginary units.
    """
    if count < 1:
        raise DomainError("count must be at least 1")
    if s.rad == 0.0:
        return [Quaternion(s.re)] * count
    out = [Quaternion(s.re, s.rad)]
    if count >= 2:
        out.append(Quaternion(s.re, -s.rad))
    extra = count - len(out)
    golden = math.pi * (3.0 - math.sqrt(5.0))
    for n in range(extra):
        # skip the poles of the lattice so the extras differ from +-i
        t = (n + 0.5) / extra
        x = 1.0 - 2.0 * t
        rho = math.sqrt(max(0.0, 1.0 - x * x))
        phi = golden * n
        out.append(Quaternion(s.re, s.rad * x, s.rad * rho * math.cos(phi), s.rad * rho * math.sin(phi)))
    return out


# sphere sets ------------------------------------------------------------

def dedupe_spheres(spheres: Iterable[Sphere], tol: float = SPHERE_TOL) -> list[Sphere]:
    """Merge spheres closer than ``tol`` (greedy clustering), sorted by (re, rad)."""
    out: list[Sphere] = []
    for s in sorted(spheres, key=lambda s: (s.re, s.rad)):
        if not any(s.isclose(t, tol) for t in out):
            out.append(s)
    return out


def contains_sphere(spheres: Sequence[Sphere], s: Sphere, tol: float = SPHERE_TOL) -> bool:
    return any(s.isclose(t, tol) for t in spheres)


def is_subset(a: Sequence[Sphere], b: Sequence[Sphere], tol: float = SPHERE_TOL) -> bool:
    return all(contains_sphere(b, s, tol) for s in a)


def sphere_sets_match(a: Sequence[Sphere], b: Sequence[Sphere], tol: float = SPHERE_TOL) -> bool:
    """Hausdorff-style equality of two finite sphere sets in (re, rad) coordinates."""
    return is_subset(a, b, tol) and is_subset(b, a, tol)


def hausdorff(a: Sequence[Sphere], b: Sequence[Sphere]) -> float:
    if not a and not b:
        return 0.0
    if not a or not b:
        return math.inf
    d1 = max(min(s.distance(t) for t in b) for s in a)
    d2 = max(min(s.distance(t) for t in a) for s in b)
    return max(d1, d2)


def without_zero(spheres: Iterable[Sphere], tol: float = SPHERE_TOL) -> list[Sphere]:
    return [s for s in spheres if not s.is_zero(tol)]


def without_purely_imaginary(spheres: Iterable[Sphere], tol: float = SPHERE_TOL) -> list[Sphere]:
    return [s for s in spheres if not s.is_purely_imaginary(tol)]
