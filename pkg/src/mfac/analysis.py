"""Frozen-coefficient closed-loop analysis in the backward-shift operator.

With the pseudo-gradient held at its value at one time ``k`` the closed loop
is linear, with characteristic polynomial (SISO)::

    T(q) = lam (1 - q) [1 - q phi_y(q)] + phi_lead * phi_u(q),   q = z^-1

and the matrix analogue ``lam (1 - q)[I - q phi_y(q)] + phi_u(q) Phi_lead^T``
for MIMO loops. Poles are the roots of ``z^d T(1/z)`` (of ``det T`` in the
MIMO case). When the disturbance is compensated with its true increment the
disturbance reaches the output through ``lam (1 - q) T(q)^-1``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .edlm import PgVector, Pjm
from .errors import SingularAtPoint, UnstableLoop, ZeroPolynomial

STABILITY_TOL = 1e-9


class ZPolynomial:
    """Polynomial ``c0 + c1 q + ... + cd q^d`` in ``q = z^-1`` with real coefficients."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs=()):
        c = np.atleast_1d(np.asarray(coeffs, dtype=float)).copy()
        nz = np.flatnonzero(c)
        self.coeffs = c[: nz[-1] + 1] if nz.size else np.zeros(0)

    @classmethod
    def shift(cls, n: int = 1) -> ZPolynomial:
        """The monomial ``q^n``."""
        c = np.zeros(n + 1)
        c[n] = 1.0
        return cls(c)

    @property
    def degree(self) -> float:
        """Degree; ``-inf`` for the zero polynomial."""
        return self.coeffs.size - 1 if self.coeffs.size else float("-inf")

    def is_zero(self) -> bool:
        return self.coeffs.size == 0

    def _coerce(self, other) -> ZPolynomial:
        return other if isinstance(other, ZPolynomial) else ZPolynomial([other])

    def __add__(self, other):
        other = self._coerce(other)
        n = max(self.coeffs.size, other.coeffs.size)
        out = np.zeros(n)
        out[: self.coeffs.size] += self.coeffs
        out[: other.coeffs.size] += other.coeffs
        return ZPolynomial(out)

    __radd__ = __add__

    def __neg__(self):
        return ZPolynomial(-self.coeffs)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        if self.is_zero() or other.is_zero():
            return ZPolynomial()
        return ZPolynomial(np.convolve(self.coeffs, other.coeffs))

    __rmul__ = __mul__

    def __eq__(self, other):
        other = self._coerce(other)
        return self.coeffs.shape == other.coeffs.shape and bool(np.all(self.coeffs == other.coeffs))

    def __call__(self, z: complex) -> complex:
        """Value at the z-plane point ``z`` (i.e. at ``q = 1/z``)."""
        q = 1.0 / z
        return complex(np.polyval(self.coeffs[::-1], q)) if self.coeffs.size else 0j

    def at_q(self, q):
        return np.polyval(self.coeffs[::-1], q) if self.coeffs.size else 0.0

    def z_form(self) -> np.ndarray:
        """Coefficients of ``z^d T(1/z)`` in descending powers of ``z``."""
        return self.coeffs.copy()

    def __repr__(self):
        return f"ZPolynomial({self.coeffs.tolist()})"


class MatrixZPolynomial:
    """Matrix polynomial ``C0 + C1 q + ...``; ``coeffs`` has shape ``(d+1, rows, cols)``."""

    def __init__(self, coeffs):
        c = np.asarray(coeffs, dtype=float)
        if c.ndim != 3:
            raise ValueError("coefficients must have shape (d+1, rows, cols)")
        keep = c.shape[0]
        while keep > 1 and not np.any(c[keep - 1]):
            keep -= 1
        self.coeffs = c[:keep].copy()

    @classmethod
    def constant(cls, matrix) -> MatrixZPolynomial:
        return cls(np.asarray(matrix, dtype=float)[None])

    @classmethod
    def from_blocks(cls, blocks) -> MatrixZPolynomial:
        """``B0 + B1 q + ...`` from a stack of blocks."""
        return cls(np.asarray(blocks, dtype=float))

    @property
    def shape(self) -> tuple[int, int]:
        return self.coeffs.shape[1:]

    @property
    def degree(self) -> int:
        return self.coeffs.shape[0] - 1

    def __add__(self, other: MatrixZPolynomial) -> MatrixZPolynomial:
        if self.shape != other.shape:
            raise ValueError(f"shape mismatch {self.shape} vs {other.shape}")
        n = max(self.coeffs.shape[0], other.coeffs.shape[0])
        out = np.zeros((n, *self.shape))
        out[: self.coeffs.shape[0]] += self.coeffs
        out[: other.coeffs.shape[0]] += other.coeffs
        return MatrixZPolynomial(out)

    def __sub__(self, other):
        return self + other.scale(ZPolynomial([-1.0]))

    def __matmul__(self, other: MatrixZPolynomial) -> MatrixZPolynomial:
        if self.shape[1] != other.shape[0]:
            raise ValueError("inner dimensions differ")
        n = self.coeffs.shape[0] + other.coeffs.shape[0] - 1
        out = np.zeros((n, self.shape[0], other.shape[1]))
        for i, a in enumerate(self.coeffs):
            for j, b in enumerate(other.coeffs):
                out[i + j] += a @ b
        return MatrixZPolynomial(out)

    def scale(self, p: ZPolynomial) -> MatrixZPolynomial:
        """Multiply every entry by the scalar polynomial ``p``."""
        if p.is_zero():
            return MatrixZPolynomial(np.zeros((1, *self.shape)))
        n = self.coeffs.shape[0] + p.coeffs.size - 1
        out = np.zeros((n, *self.shape))
        for i, c in enumerate(p.coeffs):
            out[i: i + self.coeffs.shape[0]] += c * self.coeffs
        return MatrixZPolynomial(out)

    def entry(self, i: int, j: int) -> ZPolynomial:
        return ZPolynomial(self.coeffs[:, i, j])

    def __call__(self, z: complex) -> np.ndarray:
        q = 1.0 / z
        powers = q ** np.arange(self.coeffs.shape[0])
        return np.tensordot(powers, self.coeffs, axes=1)

    def det(self) -> ZPolynomial:
        """Determinant by permutation expansion with exact coefficient convolution."""
        n, m = self.shape
        if n != m:
            raise ValueError("determinant needs a square matrix polynomial")
        total = ZPolynomial()
        for perm in itertools.permutations(range(n)):
            sign = _perm_sign(perm)
            term = ZPolynomial([float(sign)])
            for i, j in enumerate(perm):
                term = term * self.entry(i, j)
            total = total + term
        return total


def _perm_sign(perm) -> int:
    sign, seen = 1, list(perm)
    for i in range(len(seen)):
        while seen[i] != i:
            j = seen[i]
            seen[i], seen[j] = seen[j], seen[i]
            sign = -sign
    return sign


@dataclass(frozen=True)
class StabilityReport:
    roots: np.ndarray
    max_modulus: float
    stable: bool

    def to_dict(self) -> dict:
        return {
            "roots": [[float(r.real), float(r.imag)] for r in self.roots],
            "max_modulus": self.max_modulus,
            "stable": self.stable,
        }


def _one_minus_q() -> ZPolynomial:
    return ZPolynomial([1.0, -1.0])


def char_poly_siso(pg: PgVector, lam: float) -> ZPolynomial:
    q = ZPolynomial.shift(1)
    phi_y = ZPolynomial(pg.phi_y)
    phi_u = ZPolynomial(pg.phi_u)
    return lam * _one_minus_q() * (1.0 - q * phi_y) + pg.lead * phi_u


def char_poly_mimo(pjm: Pjm, lam: float) -> MatrixZPolynomial:
    m = pjm.m_y
    eye = MatrixZPolynomial.constant(np.eye(m))
    if pjm.l_y:
        inner = eye - MatrixZPolynomial.from_blocks(pjm.phi_y_blocks).scale(ZPolynomial.shift(1))
    else:
        inner = eye
    loop = MatrixZPolynomial.from_blocks(pjm.phi_u_blocks) @ MatrixZPolynomial.constant(pjm.lead.T)
    return inner.scale(lam * _one_minus_q()) + loop


def char_poly(pg: PgVector | Pjm, lam: float) -> ZPolynomial | MatrixZPolynomial:
    return char_poly_siso(pg, lam) if isinstance(pg, PgVector) else char_poly_mimo(pg, lam)


def polynomial_roots(z_coeffs) -> np.ndarray:
    """All complex roots of a polynomial given in descending powers.

    Eigenvalues of the companion matrix, each refined by a few Newton steps.
    """
    c = np.asarray(z_coeffs, dtype=float)
    nz = np.flatnonzero(c)
    if not nz.size:
        raise ZeroPolynomial("the zero polynomial has no well-defined roots")
    c = c[nz[0]:]
    n = c.size - 1
    if n == 0:
        return np.zeros(0, dtype=complex)
    companion = np.zeros((n, n))
    companion[0, :] = -c[1:] / c[0]
    companion[1:, :-1] = np.eye(n - 1)
    roots = np.linalg.eigvals(companion).astype(complex)
    dc = np.polyder(c)
    for _ in range(3):
        f = np.polyval(c, roots)
        d = np.polyval(dc, roots)
        step = np.where(np.abs(d) > 0, f / np.where(d == 0, 1, d), 0)
        better = np.abs(np.polyval(c, roots - step)) < np.abs(f)
        roots = np.where(better, roots - step, roots)
    return np.sort_complex(roots)


def poles(p: ZPolynomial | MatrixZPolynomial) -> StabilityReport:
    """Closed-loop poles and a strict unit-circle stability verdict."""
    if isinstance(p, MatrixZPolynomial):
        p = p.det()
    if p.is_zero():
        raise ZeroPolynomial("characteristic polynomial is identically zero")
    roots = polynomial_roots(p.z_form())
    max_mod = float(np.max(np.abs(roots))) if roots.size else 0.0
    return StabilityReport(roots, max_mod, max_mod < 1.0 - STABILITY_TOL)


def disturbance_transfer(pg: PgVector | Pjm, lam: float, z_point: complex):
    """Disturbance-to-output gain ``lam (1 - 1/z) T^-1`` evaluated at ``z_point``."""
    num = lam * (1.0 - 1.0 / z_point)
    T = char_poly(pg, lam)
    if isinstance(T, ZPolynomial):
        t = T(z_point)
        if abs(t) <= 1e-14:
            raise SingularAtPoint(f"T vanishes at z={z_point}")
        return num / t
    Tz = T(z_point)
    if np.linalg.cond(Tz) >= 1e12:
        raise SingularAtPoint(f"T is singular at z={z_point}")
    return np.linalg.solve(Tz, num * np.eye(Tz.shape[0]))


def steady_state_error_ramp(pg: PgVector, lam: float) -> float:
    """Final output offset caused by a unit-slope ramp disturbance.

    ``lim_{z->1} (1 - q) G_w(q) q/(1 - q)^2 = lam / T(1)`` after cancelling the
    two ``(1 - q)`` factors by hand; ``T(1) = phi_lead * sum(phi_u)`` because the
    ``lam`` term carries a ``(1 - q)`` factor.
    """
    report = poles(char_poly_siso(pg, lam))
    if not report.stable:
        raise UnstableLoop(f"closed loop is not stable (max |z| = {report.max_modulus:.6g})")
    t_one = pg.lead * float(np.sum(pg.phi_u))
    return lam / t_one
