"""Quaternionic matrices, the complex adjoint embedding and S-spectra of matrices.

A quaternionic matrix is stored through its symplectic split ``A = A1 + A2 j``
where ``A1`` and ``A2`` are complex matrices (entries in C_i). The complex
adjoint

    chi(A) = [[A1, A2], [-conj(A2), conj(A1)]]

is a unital, multiplicative *-embedding into 2n x 2n complex matrices and is
the engine for invertibility, norms and eigen-spheres.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import optimize

from .errors import DomainError, NumericError
from .quat import (
    SPHERE_TOL,
    Quaternion,
    Sphere,
    dedupe_spheres,
    sample_sphere,
)


def _as_array(a) -> np.ndarray:
    arr = np.array(a, dtype=complex)
    arr.setflags(write=False)
    return arr


class QMatrix:
    """Square matrix with quaternion entries.

    Left and right scalar actions are entrywise: ``q * A = (q a_ij)`` and
    ``A * q = (a_ij q)``. ``A @ B`` is the matrix product.
    """

    __slots__ = ("a1", "a2")

    def __init__(self, a1, a2=None):
        a1 = np.asarray(a1, dtype=complex)
        a2 = np.zeros_like(a1) if a2 is None else np.asarray(a2, dtype=complex)
        if a1.ndim != 2 or a1.shape[0] != a1.shape[1] or a1.shape != a2.shape:
            raise DomainError(f"QMatrix needs two equal square blocks, got {a1.shape} and {a2.shape}")
        if a1.shape[0] < 1:
            raise DomainError("QMatrix must be at least 1x1")
        object.__setattr__(self, "a1", _as_array(a1))
        object.__setattr__(self, "a2", _as_array(a2))

    def __setattr__(self, name, value):
        raise AttributeError("QMatrix is immutable")

    # construction -----------------------------------------------------
    @classmethod
    def from_components(cls, comps) -> "QMatrix":
        """Build from an ``(n, n, 4)`` real array of ``(w, x, y, z)`` components."""
        c = np.asarray(comps, dtype=float)
        if c.ndim != 3 or c.shape[2] != 4:
            raise DomainError(f"expected shape (n, n, 4), got {c.shape}")
        return cls(c[..., 0] + 1j * c[..., 1], c[..., 2] + 1j * c[..., 3])

    @classmethod
    def from_entries(cls, rows: Sequence[Sequence]) -> "QMatrix":
        """Build from nested rows of quaternion-like entries."""
        n = len(rows)
        comps = np.zeros((n, n, 4))
        for i, row in enumerate(rows):
            if len(row) != n:
                raise DomainError("matrix rows must all have length n")
            for j, e in enumerate(row):
                comps[i, j] = Quaternion.coerce(e).to_list()
        return cls.from_components(comps)

    @classmethod
    def identity(cls, n: int) -> "QMatrix":
        return cls(np.eye(n))

    @classmethod
    def zeros(cls, n: int) -> "QMatrix":
        return cls(np.zeros((n, n)))

    @classmethod
    def diag(cls, entries: Sequence) -> "QMatrix":
        n = len(entries)
        comps = np.zeros((n, n, 4))
        for i, e in enumerate(entries):
            comps[i, i] = Quaternion.coerce(e).to_list()
        return cls.from_components(comps)

    @classmethod
    def random(cls, n: int, rng: np.random.Generator, scale: float = 1.0) -> "QMatrix":
        """Gaussian entries, each component with standard deviation ``scale / 2``."""
        return cls.from_components(rng.normal(scale=scale / 2.0, size=(n, n, 4)))

    @classmethod
    def block(cls, blocks: Sequence[Sequence["QMatrix"]]) -> "QMatrix":
        return cls(np.block([[b.a1 for b in row] for row in blocks]),
                   np.block([[b.a2 for b in row] for row in blocks]))

    # access -----------------------------------------------------------
    @property
    def n(self) -> int:
        return self.a1.shape[0]

    def components(self) -> np.ndarray:
        return np.stack([self.a1.real, self.a1.imag, self.a2.real, self.a2.imag], axis=-1)

    def __getitem__(self, ij) -> Quaternion:
        i, j = ij
        return Quaternion.from_complex_pair(complex(self.a1[i, j]), complex(self.a2[i, j]))

    def sub(self, rows: slice, cols: slice) -> np.ndarray:
        """Return the ``(a1, a2)`` pair of a rectangular sub-block (not a QMatrix)."""
        return self.a1[rows, cols], self.a2[rows, cols]

    def chi(self) -> np.ndarray:
        return chi(self)

    # algebra ----------------------------------------------------------
    def __add__(self, other):
        if isinstance(other, QMatrix):
            return QMatrix(self.a1 + other.a1, self.a2 + other.a2)
        if isinstance(other, (int, float)):
            return self + QMatrix.identity(self.n) * other
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, QMatrix):
            return QMatrix(self.a1 - other.a1, self.a2 - other.a2)
        if isinstance(other, (int, float)):
            return self - QMatrix.identity(self.n) * other
        return NotImplemented

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return QMatrix(-self.a1, -self.a2)

    def __matmul__(self, other):
        if not isinstance(other, QMatrix):
            return NotImplemented
        # (A1 + A2 j)(B1 + B2 j) = (A1 B1 - A2 conj B2) + (A1 B2 + A2 conj B1) j
        return QMatrix(self.a1 @ other.a1 - self.a2 @ other.a2.conj(),
                       self.a1 @ other.a2 + self.a2 @ other.a1.conj())

    def __mul__(self, q):
        """Right scalar action ``A q``."""
        if isinstance(q, (int, float)):
            return QMatrix(self.a1 * q, self.a2 * q)
        if isinstance(q, QMatrix):
            raise TypeError("use @ for matrix products")
        q1, q2 = Quaternion.coerce(q).complex_pair()
        return QMatrix(self.a1 * q1 - self.a2 * np.conj(q2), self.a1 * q2 + self.a2 * np.conj(q1))

    def __rmul__(self, q):
        """Left scalar action ``q A``."""
        if isinstance(q, (int, float)):
            return QMatrix(self.a1 * q, self.a2 * q)
        q1, q2 = Quaternion.coerce(q).complex_pair()
        return QMatrix(q1 * self.a1 - q2 * self.a2.conj(), q1 * self.a2 + q2 * self.a1.conj())

    def __truediv__(self, s):
        if isinstance(s, (int, float)):
            return QMatrix(self.a1 / s, self.a2 / s)
        return NotImplemented

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            return NotImplemented
        out = QMatrix.identity(self.n)
        for _ in range(k):
            out = out @ self
        return out

    def star(self) -> "QMatrix":
        """Quaternionic conjugate transpose."""
        return QMatrix(self.a1.conj().T, -self.a2.T)

    def norm(self) -> float:
        return op_norm(self)

    def allclose(self, other: "QMatrix", tol: float = 1e-12) -> bool:
        return max_abs_diff(self, other) <= tol

    def __eq__(self, other):
        if not isinstance(other, QMatrix):
            return NotImplemented
        return np.array_equal(self.a1, other.a1) and np.array_equal(self.a2, other.a2)

    __hash__ = None

    def __repr__(self):
        return f"QMatrix(n={self.n}, components={self.components().tolist()!r})"

    # serialisation ----------------------------------------------------
    def to_json(self) -> dict:
        return {"n": self.n, "entries": self.components().tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "QMatrix":
        try:
            n = int(obj["n"])
            comps = np.asarray(obj["entries"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise DomainError(f"malformed matrix JSON: {exc}") from None
        if comps.shape != (n, n, 4):
            raise DomainError(f"matrix JSON entries have shape {comps.shape}, expected {(n, n, 4)}")
        return cls.from_components(comps)


def max_abs_diff(a: QMatrix, b: QMatrix) -> float:
    return float(max(np.abs(a.a1 - b.a1).max(), np.abs(a.a2 - b.a2).max()))


def chi(A: QMatrix) -> np.ndarray:
    """Complex adjoint ``[[A1, A2], [-conj(A2), conj(A1)]]``."""
    return np.block([[A.a1, A.a2], [-A.a2.conj(), A.a1.conj()]])


def from_chi(M: np.ndarray, check: bool = True, tol: float = 1e-10) -> QMatrix:
    """Recover ``A`` from ``chi(A)``; with ``check`` the block structure is verified."""
    M = np.asarray(M)
    n = M.shape[0] // 2
    a1, a2 = M[:n, :n], M[:n, n:]
    if check:
        err = max(np.abs(M[n:, :n] + a2.conj()).max(), np.abs(M[n:, n:] - a1.conj()).max())
        if err > tol * max(1.0, np.abs(M).max()):
            raise DomainError(f"matrix is not a complex adjoint (structure defect {err:.3g})")
    return QMatrix(a1, a2)


def singular_values(A: QMatrix) -> np.ndarray:
    """Singular values of ``A``: each appears twice in chi(A); returned once, descending."""
    s = np.linalg.svd(chi(A), compute_uv=False)
    return s[::2]


def op_norm(A: QMatrix) -> float:
    return float(np.linalg.svd(chi(A), compute_uv=False)[0])


def sigma_min(A: QMatrix) -> float:
    return float(np.linalg.svd(chi(A), compute_uv=False)[-1])


def default_tol(A: QMatrix) -> float:
    return 1e-9 * max(1.0, op_norm(A))


def is_invertible(A: QMatrix, tol: float | None = None) -> tuple[bool, float]:
    """Return ``(sigma_min(chi(A)) > tol, sigma_min)``.

    The default threshold is ``1e-9 * max(1, ||A||)``.
    """
    s = np.linalg.svd(chi(A), compute_uv=False)
    if tol is None:
        tol = 1e-9 * max(1.0, float(s[0]))
    if tol <= 0:
        raise DomainError("tol must be positive")
    smin = float(s[-1])
    return smin > tol, smin


def inverse(A: QMatrix) -> QMatrix:
    ok, smin = is_invertible(A)
    if not ok:
        raise DomainError(f"matrix is singular (sigma_min = {smin:.3g})")
    return from_chi(np.linalg.inv(chi(A)), check=False)


def char_elem(A: QMatrix, q) -> QMatrix:
    """Spherical characteristic element ``A^2 - 2 Re(q) A + |q|^2 I``."""
    q = Quaternion.coerce(q)
    return A @ A - A * (2.0 * q.re) + QMatrix.identity(A.n) * q.norm2()


def random_unitary(n: int, rng: np.random.Generator) -> QMatrix:
    """Random quaternionic unitary via the polar factor of a Gaussian matrix."""
    X = chi(QMatrix.random(n, rng))
    W, _, Vh = np.linalg.svd(X)
    # polar factor of a chi-structured matrix is chi-structured
    return from_chi(W @ Vh, check=True, tol=1e-8)


# S-spectrum ---------------------------------------------------------------

def s_spectrum_exact(A: QMatrix, tol: float = SPHERE_TOL, verify: bool = True,
                     verify_samples: int = 3) -> list[Sphere]:
    """S-spectrum of ``A`` as a finite list of spheres.

    Eigenvalues of ``chi(A)`` come in conjugate pairs; each pair gives one
    sphere ``(Re lam, |Im lam|)``. With ``verify`` every sphere is
    self-certified: ``char_elem(A, p)`` must be numerically singular for
    sampled members ``p``.
    """
    try:
        ev = np.linalg.eigvals(chi(A))
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigen-solver failed: {exc}") from exc
    if not np.all(np.isfinite(ev)):
        raise NumericError("eigen-solver returned non-finite eigenvalues")
    spheres = dedupe_spheres((Sphere(lam.real, abs(lam.imag)) for lam in ev), tol)
    if verify:
        scale = max(1.0, op_norm(A)) ** 2
        for s in spheres:
            for p in sample_sphere(s, verify_samples):
                smin = sigma_min(char_elem(A, p))
                # defective eigenvalues are only accurate to ~sqrt(eps)
                if smin > 1e-6 * scale:
                    raise NumericError(
                        f"sphere {s} failed self-verification: sigma_min(R_q(A)) = {smin:.3g}")
    return spheres


@dataclass(frozen=True)
class GridSpec:
    """Rectangle ``[u0, u1] x [0, r1]`` of the (Re q, |Im q|) half-plane."""

    u0: float
    u1: float
    r1: float
    step: float

    def __post_init__(self):
        if not self.step > 0:
            raise DomainError("grid step must be positive")
        if self.u1 < self.u0 or self.r1 < 0:
            raise DomainError("grid needs u0 <= u1 and r1 >= 0")

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        """Parse ``"u0,u1,r1,step"``."""
        try:
            u0, u1, r1, step = (float(t) for t in text.split(","))
        except ValueError:
            raise DomainError(f"grid must be 'u0,u1,r1,step', got {text!r}") from None
        return cls(u0, u1, r1, step)

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        nu = int(round((self.u1 - self.u0) / self.step)) + 1
        nr = int(round(self.r1 / self.step)) + 1
        return self.u0 + self.step * np.arange(nu), self.step * np.arange(nr)


@dataclass
class ScanResult:
    u: np.ndarray
    r: np.ndarray
    sigma: np.ndarray  # shape (len(u), len(r))

    def rows(self):
        for a, u in enumerate(self.u):
            for b, r in enumerate(self.r):
                yield float(u), float(r), float(self.sigma[a, b])

    def to_csv(self) -> str:
        lines = ["u,r,sigma_min"]
        lines += [f"{u:.12g},{r:.12g},{s:.12g}" for u, r, s in self.rows()]
        return "\n".join(lines) + "\n"

    def argmin(self) -> tuple[float, float, float]:
        a, b = np.unravel_index(np.argmin(self.sigma), self.sigma.shape)
        return float(self.u[a]), float(self.r[b]), float(self.sigma[a, b])

    def local_minima(self) -> list[tuple[float, float, float]]:
        """Grid points not exceeding any of their (up to 8) neighbours."""
        S = self.sigma
        P = np.pad(S, 1, constant_values=np.inf)
        mask = np.ones_like(S, dtype=bool)
        for da in (-1, 0, 1):
            for db in (-1, 0, 1):
                if da == db == 0:
                    continue
                mask &= S <= P[1 + da:1 + da + S.shape[0], 1 + db:1 + db + S.shape[1]]
        return [(float(self.u[a]), float(self.r[b]), float(S[a, b])) for a, b in zip(*np.nonzero(mask))]


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("SSPEC_THREADS", "1")))
    except ValueError:
        return 1


def _sigma_min_batch(X: np.ndarray, u: np.ndarray, r: np.ndarray) -> np.ndarray:
    """sigma_min of chi(R_q(A)) = X^2 - 2u X + (u^2 + r^2) for all (u, r)."""
    m = X.shape[0]
    X2 = X @ X
    eye = np.eye(m)
    M = (X2[None, None] - 2.0 * u[:, None, None, None] * X[None, None]
         + (u[:, None] ** 2 + r[None, :] ** 2)[..., None, None] * eye)
    return np.linalg.svd(M, compute_uv=False)[..., -1]


def s_spectrum_scan(A: QMatrix, grid: GridSpec) -> ScanResult:
    """Brute-force scan of ``sigma_min(chi(R_q(A)))`` with ``q = u + i r`` over ``grid``."""
    u, r = grid.axes()
    X = chi(A)
    chunks = np.array_split(np.arange(len(u)), max(1, min(len(u), 8 * _workers())))
    chunks = [c for c in chunks if len(c)]
    with ThreadPoolExecutor(max_workers=_workers()) as pool:
        parts = list(pool.map(lambda c: _sigma_min_batch(X, u[c], r), chunks))
    return ScanResult(u, r, np.concatenate(parts, axis=0))


def sigma_min_at(A: QMatrix, u: float, r: float) -> float:
    return float(_sigma_min_batch(chi(A), np.array([u]), np.array([abs(r)]))[0, 0])


def refine_minimum(A: QMatrix, u: float, r: float, step: float) -> tuple[float, float, float]:
    """Polish a scan minimum with Nelder-Mead; returns ``(u, r, sigma_min)``."""
    X = chi(A)

    def f(p):
        return float(_sigma_min_batch(X, np.array([p[0]]), np.array([abs(p[1])]))[0, 0])

    res = optimize.minimize(f, x0=[u, r], method="Nelder-Mead",
                            options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 4000,
                                     "initial_simplex": [[u, r], [u + step / 2, r], [u, r + step / 2]]})
    return float(res.x[0]), float(abs(res.x[1])), float(res.fun)


def sphere_distance_to_points(s: Sphere, pts) -> float:
    return min(math.hypot(s.re - u, s.rad - r) for u, r, *_ in pts)
