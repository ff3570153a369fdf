"""Polynomials stored as coefficients over scaled monomials on a local frame.

A :class:`PolyBasis` holds ``nfun`` polynomial functions sharing a frame and a
value shape.  Coefficients live in an array of shape ``(nfun, nmono, *vshape)``
where monomials are graded, so the monomials of degree ``<= p`` are a prefix of
those of degree ``<= p + 1``.  All calculus is done on coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np


def _compositions(total, parts):
    if parts == 1:
        return [(total,)]
    out = []
    for first in range(total, -1, -1):
        out.extend((first,) + rest for rest in _compositions(total - first, parts - 1))
    return out


@lru_cache(maxsize=None)
def exponents(dim: int, degree: int) -> np.ndarray:
    """Graded exponent table of shape ``(nmono, dim)``."""
    rows = []
    for p in range(degree + 1):
        rows.extend(_compositions(p, dim))
    arr = np.array(rows, dtype=int).reshape(-1, dim)
    arr.flags.writeable = False
    return arr


def n_monomials(dim: int, degree: int) -> int:
    return comb(degree + dim, dim) if degree >= 0 else 0


@lru_cache(maxsize=None)
def _index(dim, degree):
    return {tuple(e): i for i, e in enumerate(exponents(dim, degree))}


@lru_cache(maxsize=None)
def _derivative_matrix(dim, degree, axis):
    exps = exponents(dim, degree)
    idx = _index(dim, degree)
    mat = np.zeros((len(exps), len(exps)))
    for m, e in enumerate(exps):
        if e[axis] > 0:
            lowered = list(e)
            lowered[axis] -= 1
            mat[m, idx[tuple(lowered)]] = e[axis]
    mat.flags.writeable = False
    return mat


@lru_cache(maxsize=None)
def _shift_matrix(dim, degree, axis):
    exps = exponents(dim, degree)
    idx = _index(dim, degree + 1)
    mat = np.zeros((len(exps), n_monomials(dim, degree + 1)))
    for m, e in enumerate(exps):
        raised = list(e)
        raised[axis] += 1
        mat[m, idx[tuple(raised)]] = 1.0
    mat.flags.writeable = False
    return mat


@dataclass(frozen=True, eq=False)
class Frame:
    """Affine chart ``xi = axes @ (x - origin) / scale``.

    ``axes`` has orthonormal rows; its row count is the frame dimension.
    """

    origin: np.ndarray
    axes: np.ndarray
    scale: float

    @property
    def dim(self) -> int:
        return self.axes.shape[0]

    def local(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.origin) @ self.axes.T / self.scale

    @classmethod
    def cell(cls, center, diameter):
        return cls(np.asarray(center, dtype=float), np.eye(3), float(diameter))


def monomial_values(frame: Frame, degree: int, x: np.ndarray) -> np.ndarray:
    """Scaled monomials at points ``x``, shape ``(npts, nmono)``."""
    xi = frame.local(np.atleast_2d(x))
    exps = exponents(frame.dim, degree)
    out = np.ones((xi.shape[0], len(exps)))
    for a in range(frame.dim):
        powers = xi[:, a:a + 1] ** np.arange(degree + 1)
        out *= powers[:, exps[:, a]]
    return out


class PolyBasis:
    """A finite family of polynomial functions on one frame."""

    __slots__ = ("frame", "degree", "coeffs")

    def __init__(self, frame: Frame, degree: int, coeffs: np.ndarray):
        degree = max(int(degree), 0)
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape[1] != n_monomials(frame.dim, degree):
            raise ValueError("coefficient array does not match the monomial count")
        self.frame = frame
        self.degree = degree
        self.coeffs = coeffs

    def __len__(self):
        return self.coeffs.shape[0]

    @property
    def vshape(self) -> tuple:
        return self.coeffs.shape[2:]

    def __getitem__(self, item):
        coeffs = self.coeffs[item]
        if coeffs.ndim == self.coeffs.ndim - 1:
            coeffs = coeffs[None]
        return PolyBasis(self.frame, self.degree, coeffs)

    def __repr__(self):
        return f"PolyBasis(n={len(self)}, degree={self.degree}, vshape={self.vshape})"

    @classmethod
    def empty(cls, frame, vshape=()):
        return cls(frame, 0, np.zeros((0, 1) + tuple(vshape)))

    @classmethod
    def monomials(cls, frame, degree, vshape=()):
        """Monomials times unit tensors of ``vshape``, scalar index outermost."""
        if degree < 0:
            return cls.empty(frame, vshape)
        nm = n_monomials(frame.dim, degree)
        ncomp = int(np.prod(vshape, dtype=int))
        coeffs = np.einsum("mn,cd->mcnd", np.eye(nm), np.eye(ncomp))
        return cls(frame, degree, coeffs.reshape((nm * ncomp, nm) + tuple(vshape)))

    def eval(self, x: np.ndarray) -> np.ndarray:
        """Values at points, shape ``(nfun, npts, *vshape)``."""
        mono = monomial_values(self.frame, self.degree, x)
        return np.tensordot(mono, self.coeffs, axes=([1], [1])).swapaxes(0, 1)

    def elevate(self, degree: int) -> "PolyBasis":
        if degree <= self.degree:
            return self
        pad = n_monomials(self.frame.dim, degree) - self.coeffs.shape[1]
        widths = [(0, 0), (0, pad)] + [(0, 0)] * len(self.vshape)
        return PolyBasis(self.frame, degree, np.pad(self.coeffs, widths))

    def deriv(self, axis: int) -> "PolyBasis":
        """Physical derivative along frame axis ``axis``."""
        mat = _derivative_matrix(self.frame.dim, self.degree, axis)
        coeffs = np.tensordot(mat, self.coeffs, axes=([0], [1])).swapaxes(0, 1)
        return PolyBasis(self.frame, self.degree, coeffs / self.frame.scale)

    def mul_coord(self, axis: int) -> "PolyBasis":
        """Multiply by the physical coordinate ``(x - origin) . axes[axis]``."""
        mat = _shift_matrix(self.frame.dim, self.degree, axis)
        coeffs = np.tensordot(mat, self.coeffs, axes=([0], [1])).swapaxes(0, 1)
        return PolyBasis(self.frame, self.degree + 1, coeffs * self.frame.scale)

    def map(self, fn) -> "PolyBasis":
        """Apply a linear map acting on the trailing value axes."""
        return PolyBasis(self.frame, self.degree, fn(self.coeffs))

    def transform(self, mat: np.ndarray) -> "PolyBasis":
        """New family whose i-th member is ``sum_j mat[i, j] * self[j]``."""
        coeffs = np.tensordot(np.asarray(mat, dtype=float), self.coeffs, axes=([1], [0]))
        return PolyBasis(self.frame, self.degree, coeffs)

    # field protocol used by the interpolators
    def values(self, x):
        return self.eval(x)

    def gradients(self, x):
        if self.frame.dim != 3 or not np.allclose(self.frame.axes, np.eye(3)):
            raise ValueError("gradients need a cell frame aligned with the global axes")
        return grad(self).eval(x)


def concat(*bases: PolyBasis) -> PolyBasis:
    bases = [b for b in bases if len(b)] or bases[:1]
    degree = max(b.degree for b in bases)
    frame = bases[0].frame
    coeffs = np.concatenate([b.elevate(degree).coeffs for b in bases], axis=0)
    return PolyBasis(frame, degree, coeffs)


def _stack(parts, axis=-1):
    degree = max(p.degree for p in parts)
    coeffs = np.stack([p.elevate(degree).coeffs for p in parts], axis=axis)
    return PolyBasis(parts[0].frame, degree, coeffs)


def _lin(parts, weights):
    degree = max(p.degree for p in parts)
    coeffs = sum(w * p.elevate(degree).coeffs for p, w in zip(parts, weights))
    return PolyBasis(parts[0].frame, degree, coeffs)


def _comp(basis, *index):
    return basis.map(lambda c: c[(Ellipsis,) + index])


def grad(basis: PolyBasis) -> PolyBasis:
    """Gradient appended as a trailing axis (components along frame axes)."""
    return _stack([basis.deriv(a) for a in range(basis.frame.dim)])


def hess(basis: PolyBasis) -> PolyBasis:
    return grad(grad(basis))


def div(basis: PolyBasis) -> PolyBasis:
    """Divergence acting on the last value axis (row-wise for matrices)."""
    d = basis.frame.dim
    if not basis.vshape or basis.vshape[-1] != d:
        raise ValueError("div needs a trailing axis of the frame dimension")
    return _lin([_comp(basis.deriv(a), a) for a in range(d)], [1.0] * d)


def curl2(basis: PolyBasis) -> PolyBasis:
    """Face CURL of scalars, ``(d2 r, -d1 r)``, applied to every component."""
    if basis.frame.dim != 2:
        raise ValueError("curl2 needs a two-dimensional frame")
    return _stack([basis.deriv(1), basis.deriv(0).map(np.negative)])


def rot2(basis: PolyBasis) -> PolyBasis:
    """Scalar rotor ``d1 v2 - d2 v1`` on the last value axis."""
    if basis.frame.dim != 2 or basis.vshape[-1:] != (2,):
        raise ValueError("rot2 needs 2D vector values on a 2D frame")
    return _lin([_comp(basis.deriv(0), 1), _comp(basis.deriv(1), 0)], [1.0, -1.0])


_LEVI = np.zeros((3, 3, 3))
for _i, _j, _k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    _LEVI[_i, _j, _k], _LEVI[_i, _k, _j] = 1.0, -1.0


def curl3(basis: PolyBasis) -> PolyBasis:
    """Curl on the last value axis (row-wise for matrices)."""
    if basis.frame.dim != 3 or basis.vshape[-1:] != (3,):
        raise ValueError("curl3 needs 3D vector values on a 3D frame")
    g = grad(basis)  # [..., k, j] = d_j u_k
    return g.map(lambda c: np.einsum("ijk,...kj->...i", _LEVI, c))


def cross_const(basis: PolyBasis, vec) -> PolyBasis:
    """Row-wise cross product ``u x vec`` with a constant vector."""
    vec = np.asarray(vec, dtype=float)
    return basis.map(lambda c: np.einsum("ijk,...j,k->...i", _LEVI, c, vec))


def mul_x(basis: PolyBasis) -> PolyBasis:
    """Outer product with the local position, appended as a trailing axis."""
    return _stack([basis.mul_coord(a) for a in range(basis.frame.dim)])


def cross_x(basis: PolyBasis) -> PolyBasis:
    """Row-wise cross product with the local position ``x - origin``."""
    outer = mul_x(basis)  # [..., j, k] = u_j x_k
    return outer.map(lambda c: np.einsum("ijk,...jk->...i", _LEVI, c))


def trace(basis: PolyBasis) -> PolyBasis:
    return basis.map(lambda c: np.trace(c, axis1=-2, axis2=-1))


def sym(basis: PolyBasis) -> PolyBasis:
    return basis.map(lambda c: 0.5 * (c + np.swapaxes(c, -1, -2)))


def dev(basis: PolyBasis) -> PolyBasis:
    d = basis.vshape[-1]
    eye = np.eye(d)
    return basis.map(lambda c: c - np.trace(c, axis1=-2, axis2=-1)[..., None, None] * eye / d)


def adj2(basis: PolyBasis) -> PolyBasis:
    """Adjugate of 2x2 values, ``[[a, b], [c, d]] -> [[d, -b], [-c, a]]``."""

    def fn(c):
        out = np.empty_like(c)
        out[..., 0, 0], out[..., 1, 1] = c[..., 1, 1], c[..., 0, 0]
        out[..., 0, 1], out[..., 1, 0] = -c[..., 0, 1], -c[..., 1, 0]
        return out

    return basis.map(fn)


def apply_diff(op: str, basis: PolyBasis, vec=None) -> PolyBasis:
    """Dispatch by name; ``vec`` is the constant vector for ``cross``."""
    table = {
        "grad": grad, "div": div, "curl_F": curl2, "rot_F": rot2, "CURL": curl3,
        "div_F": div, "hess": hess, "dev": dev, "sym": sym, "trace": trace,
    }
    if op == "cross":
        return cross_const(basis, vec)
    if op not in table:
        raise ValueError(f"unknown operator {op!r}")
    return table[op](basis)
