"""Left S-resolvent, Cauchy kernel series and a slice-regularity checker."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DivergenceError, DomainError, SpectralPointError
from .qmat import QMatrix, char_elem, inverse, is_invertible, op_norm
from .quat import ONE, Quaternion

MAX_TERMS = 200


@dataclass(frozen=True)
class ResolventSample:
    q: Quaternion
    value: QMatrix


def _check_off_spectrum(A: QMatrix, q: Quaternion, tol: float | None) -> QMatrix:
    R = char_elem(A, q)
    ok, smin = is_invertible(R, tol)
    if not ok:
        raise SpectralPointError(f"q = {q} lies on the S-spectrum (sigma_min = {smin:.3g})", q, smin)
    return R


def s_resolvent_left(A: QMatrix, q, tol: float | None = None) -> QMatrix:
    """``S_L^{-1}(q, A) = -R_q(A)^{-1} (A - conj(q) I)``."""
    q = Quaternion.coerce(q)
    R = _check_off_spectrum(A, q, tol)
    return -(inverse(R) @ (A - QMatrix.identity(A.n) * q.conj()))


def resolvent_sample(A: QMatrix, q) -> ResolventSample:
    q = Quaternion.coerce(q)
    return ResolventSample(q, s_resolvent_left(A, q))


def _check_series_domain(A: QMatrix, q: Quaternion, N: int) -> float:
    if N < 0 or N > MAX_TERMS:
        raise DomainError(f"series length must be in [0, {MAX_TERMS}], got {N}")
    nA = op_norm(A)
    if not nA < q.norm():
        raise DivergenceError(f"Cauchy series diverges: ||A|| = {nA:.6g} >= |q| = {q.norm():.6g}")
    return nA


def cauchy_partial_sums(A: QMatrix, q, N: int) -> list[QMatrix]:
    """All partial sums ``sum_{n<=m} A^n q^{-1-n}`` for ``m = 0..N``."""
    q = Quaternion.coerce(q)
    _check_series_domain(A, q, N)
    qinv = q.inverse()
    power = QMatrix.identity(A.n)   # A^n
    qpow = qinv                     # q^{-1-n}
    total = power * qpow
    out = [total]
    for _ in range(N):
        power = power @ A
        qpow = qpow * qinv
        total = total + power * qpow
        out.append(total)
    return out


def cauchy_partial_sum(A: QMatrix, q, N: int) -> QMatrix:
    return cauchy_partial_sums(A, q, N)[-1]


def _series_inverse_factor(A: QMatrix, q: Quaternion) -> QMatrix:
    """``-(A - conj(q) I)^{-1} R_q(A)``, the claimed inverse of the Cauchy series."""
    shifted = A - QMatrix.identity(A.n) * q.conj()
    ok, smin = is_invertible(shifted)
    if not ok:
        raise DomainError(f"A - conj(q) I is singular (sigma_min = {smin:.3g})")
    return -(inverse(shifted) @ char_elem(A, q))


def series_inverse_identity(A: QMatrix, q, N: int) -> float:
    """``|| S_N(q) * [-(A - conj(q))^{-1} R_q(A)] - I ||`` for the N-th partial sum."""
    q = Quaternion.coerce(q)
    S = cauchy_partial_sum(A, q, N)
    return op_norm(S @ _series_inverse_factor(A, q) - QMatrix.identity(A.n))


def series_inverse_residuals(A: QMatrix, q, N: int) -> list[float]:
    q = Quaternion.coerce(q)
    F = _series_inverse_factor(A, q)
    I = QMatrix.identity(A.n)
    return [op_norm(S @ F - I) for S in cauchy_partial_sums(A, q, N)]


def series_coefficients(q, N: int) -> list[Quaternion]:
    """``a_n = |q|^{-2n-2} sum_{h=0}^{n} q^h conj(q)^{n-h}`` for ``n = 0..N``."""
    q = Quaternion.coerce(q)
    if q.norm2() == 0.0:
        raise DomainError("coefficients need q != 0")
    qbar = q.conj()
    m2 = q.norm2()
    qp = [ONE]
    qbp = [ONE]
    for _ in range(N):
        qp.append(qp[-1] * q)
        qbp.append(qbp[-1] * qbar)
    out = []
    for n in range(N + 1):
        s = Quaternion()
        for h in range(n + 1):
            s = s + qp[h] * qbp[n - h]
        out.append(s / m2 ** (n + 1))
    return out


def coefficient_partial_sums(A: QMatrix, q, N: int) -> list[QMatrix]:
    q = Quaternion.coerce(q)
    _check_series_domain(A, q, N)
    coeffs = series_coefficients(q, N)
    power = QMatrix.identity(A.n)
    total = power * coeffs[0]
    out = [total]
    for n in range(1, N + 1):
        power = power @ A
        total = total + power * coeffs[n]
        out.append(total)
    return out


def coefficient_inverse(A: QMatrix, q, N: int) -> float:
    """``|| R_q(A) (sum_{n<=N} A^n a_n) - I ||``."""
    return coefficient_inverse_residuals(A, q, N)[-1]


def coefficient_inverse_residuals(A: QMatrix, q, N: int) -> list[float]:
    q = Quaternion.coerce(q)
    R = char_elem(A, q)
    I = QMatrix.identity(A.n)
    return [op_norm(R @ S - I) for S in coefficient_partial_sums(A, q, N)]


# slice regularity ------------------------------------------------------------

def _right_mul(value, unit: Quaternion):
    if isinstance(value, QMatrix):
        return value * unit
    return Quaternion.coerce(value) * unit


def _norm(value) -> float:
    if isinstance(value, QMatrix):
        return op_norm(value)
    return Quaternion.coerce(value).norm()


def wirtinger_residual(f: Callable, q0: float, q1: float, unit: Quaternion, h: float) -> float:
    """Central-difference estimate of ``|| 1/2 (d f/d q0 + (d f/d q1) I) ||`` on the slice C_I.

    ``f`` maps a quaternion to a quaternion or a QMatrix; ``I`` multiplies on
    the right. Five evaluations are used (the centre only for validation).
    """
    if not h > 0:
        raise DomainError("step h must be positive")
    def at(a, b):
        return f(Quaternion(a) + unit * b)
    f(Quaternion(q0) + unit * q1)
    d0 = (at(q0 + h, q1) - at(q0 - h, q1)) / (2 * h)
    d1 = (at(q0, q1 + h) - at(q0, q1 - h)) / (2 * h)
    return 0.5 * _norm(d0 + _right_mul(d1, unit))


def slice_regularity_residual(A: QMatrix, q0: float, q1: float, unit: Quaternion, h: float) -> float:
    """Wirtinger residual of ``q -> S_L^{-1}(q, A)`` on the slice through ``unit``."""
    unit = Quaternion.coerce(unit)
    if abs(unit.re) > 1e-12 or abs(unit.norm() - 1.0) > 1e-12:
        raise DomainError(f"{unit} is not an imaginary unit")
    return wirtinger_residual(lambda q: s_resolvent_left(A, q), q0, q1, unit, h)


def resolvent_report(A: QMatrix, q, N: int) -> dict:
    """Per-N residuals of both series identities (the ``resolvent`` CLI payload)."""
    q = Quaternion.coerce(q)
    return {
        "q": q.to_list(),
        "residual_series": series_inverse_residuals(A, q, N),
        "residual_coeff": coefficient_inverse_residuals(A, q, N),
    }


def convergence_slope(residuals) -> float:
    """Least-squares slope of ``log(residual)`` against N (floor at 1e-300)."""
    r = np.maximum(np.asarray(residuals, dtype=float), 1e-300)
    n = np.arange(len(r))
    return float(np.polyfit(n, np.log(r), 1)[0])
