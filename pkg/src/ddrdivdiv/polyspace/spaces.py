"""Orthonormal bases of full, decomposition and trimmed polynomial spaces."""

from __future__ import annotations

from enum import Enum
from math import comb

import numpy as np
from scipy.linalg import solve_triangular

from .poly import (
    Frame, PolyBasis, adj2, concat, cross_x, curl2, curl3, dev, hess, mul_x, sym,
)

RANK_TOL = 1e-10


class DimensionMismatch(RuntimeError):
    """A constructed span does not have the dimension its space must have."""


class SpaceKind(str, Enum):
    FULL = "P"
    ROLY = "Roly"
    CROLY = "cRoly"
    CGOLY = "CGoly"
    CCGOLY = "cCGoly"
    SROLY = "SRoly"
    CSROLY = "cSRoly"
    HOLY = "Holy"
    CHOLY = "cHoly"
    RT = "RT"
    CGTRIM = "CGtrim"
    SRTRIM = "SRtrim"
    HTRIM = "Htrim"


# component bases ------------------------------------------------------------------
def _unit(shape):
    n = int(np.prod(shape, dtype=int))
    return np.eye(n).reshape((n,) + tuple(shape))


def sym_basis(d=3):
    """Frobenius-orthonormal basis of symmetric ``d x d`` matrices."""
    out = []
    for i in range(d):
        m = np.zeros((d, d))
        m[i, i] = 1.0
        out.append(m)
    for i in range(d):
        for j in range(i + 1, d):
            m = np.zeros((d, d))
            m[i, j] = m[j, i] = np.sqrt(0.5)
            out.append(m)
    return np.array(out)


def dev_basis():
    """Frobenius-orthonormal basis of traceless 3x3 matrices."""
    out = []
    for i in range(3):
        for j in range(3):
            if i != j:
                m = np.zeros((3, 3))
                m[i, j] = 1.0
                out.append(m)
    out.append(np.diag([1.0, -1.0, 0.0]) / np.sqrt(2))
    out.append(np.diag([1.0, 1.0, -2.0]) / np.sqrt(6))
    return np.array(out)


COMPONENTS = {
    "scalar": lambda: np.ones((1,)),
    "vec2": lambda: _unit((2,)),
    "vec3": lambda: _unit((3,)),
    "mat2": lambda: _unit((2, 2)),
    "mat3": lambda: _unit((3, 3)),
    "sym2": lambda: sym_basis(2),
    "sym3": lambda: sym_basis(3),
    "dev3": dev_basis,
}


def component_basis(codomain: str) -> np.ndarray:
    """Orthonormal components ``(ncomp, *shape)`` for a codomain tag."""
    if codomain not in COMPONENTS:
        raise ValueError(f"unknown codomain {codomain!r}")
    return COMPONENTS[codomain]()


# dimensions -----------------------------------------------------------------------
def dim_p(ell: int, d: int = 3) -> int:
    return comb(ell + d, d) if ell >= 0 else 0


def space_dim(kind, ell: int) -> int:
    """Dimension of a decomposition or trimmed space (negative index conventions)."""
    kind = SpaceKind(kind)
    p2 = lambda m: dim_p(m, 2)  # noqa: E731
    p3 = lambda m: dim_p(m, 3)  # noqa: E731
    if kind is SpaceKind.ROLY:
        return p2(ell + 1) - 1 if ell >= 0 else 0
    if kind is SpaceKind.CROLY:
        return p2(ell - 1)
    if kind is SpaceKind.CGOLY:
        return 2 * (p2(ell + 1) - 1) if ell >= 0 else 0
    if kind is SpaceKind.CCGOLY:
        return 2 * p2(ell - 1)
    if kind is SpaceKind.SROLY:
        return 8 * p3(ell) - 3 * p3(ell - 1) if ell >= 0 else 0
    if kind is SpaceKind.CSROLY:
        return 3 * p3(ell - 1)
    if kind is SpaceKind.HOLY:
        return p3(ell + 2) - 4 if ell >= 0 else 0
    if kind is SpaceKind.CHOLY:
        return 6 * p3(ell) - space_dim(SpaceKind.HOLY, ell) if ell >= 0 else 0
    if kind is SpaceKind.RT:
        return space_dim("Roly", ell - 1) + space_dim("cRoly", ell)
    if kind is SpaceKind.CGTRIM:
        return space_dim("CGoly", ell - 1) + space_dim("cCGoly", ell)
    if kind is SpaceKind.SRTRIM:
        return space_dim("SRoly", ell - 1) + space_dim("cSRoly", ell)
    if kind is SpaceKind.HTRIM:
        return space_dim("Holy", ell - 2) + space_dim("cHoly", ell)
    raise ValueError(f"no closed form for {kind}")


# orthonormalization -----------------------------------------------------------------
def _weighted(basis, rule):
    nc = int(np.prod(basis.vshape, dtype=int))
    vals = basis.eval(rule.points).reshape(len(basis), len(rule), nc)
    return vals * np.sqrt(rule.weights)[None, :, None]


def gram(basis: PolyBasis, rule) -> np.ndarray:
    a = _weighted(basis, rule).reshape(len(basis), -1)
    return a @ a.T


def orthonormalize_cholesky(basis: PolyBasis, rule, passes: int = 2) -> PolyBasis:
    """Gram-Schmidt via Cholesky; keeps nested spans of graded inputs."""
    for _ in range(passes):
        if not len(basis):
            return basis
        chol = np.linalg.cholesky(gram(basis, rule))
        basis = basis.transform(np.linalg.inv(chol))
    return basis


def _independent_members(a: np.ndarray, tol: float) -> list:
    """Indices kept by an in-order Cholesky of the Gram matrix that skips
    members whose residual is below ``tol`` relative to the largest norm."""
    g = a @ a.T
    floor = tol * tol * g.diagonal().max()
    keep = []
    lower = np.zeros((0, 0))
    for i in range(len(g)):
        y = solve_triangular(lower, g[keep, i], lower=True) if keep else np.zeros(0)
        d = g[i, i] - y @ y
        if d > floor:
            n = len(keep)
            grown = np.zeros((n + 1, n + 1))
            grown[:n, :n] = lower
            grown[n, :n] = y
            grown[n, n] = np.sqrt(d)
            lower = grown
            keep.append(i)
    return keep


def orthonormalize_svd(basis: PolyBasis, rule, expected=None) -> PolyBasis:
    """Rank-revealing reduction of a spanning set to an orthonormal basis.

    The rank comes from the singular values; the basis itself is built from the
    first independent members in input order, so congruent entities get
    identical coefficients.
    """
    if not len(basis):
        if expected:
            raise DimensionMismatch(f"empty span, expected dimension {expected}")
        return basis
    a = _weighted(basis, rule).reshape(len(basis), -1)
    s = np.linalg.svd(a, compute_uv=False)
    rank = int((s > RANK_TOL * s[0]).sum()) if s[0] > 0 else 0
    if expected is not None and rank != expected:
        raise DimensionMismatch(f"span has rank {rank}, expected {expected}")
    keep = _independent_members(a, 1e-6)
    if len(keep) != rank:
        # ill-conditioned family; fall back to the singular vectors
        u, s, _ = np.linalg.svd(a, full_matrices=False)
        reduced = basis.transform((u[:, :rank] / s[:rank]).T)
    else:
        reduced = basis[keep]
    return orthonormalize_cholesky(reduced, rule)


# spaces -----------------------------------------------------------------------------
def full_basis(frame: Frame, degree: int, rule, codomain: str = "scalar") -> PolyBasis:
    """Orthonormal basis of ``P^degree`` with values in ``codomain``."""
    scalar = orthonormalize_cholesky(PolyBasis.monomials(frame, degree), rule)
    if codomain == "scalar":
        return scalar
    return tensorize(scalar, component_basis(codomain))


def tensorize(scalar: PolyBasis, comps: np.ndarray) -> PolyBasis:
    """``scalar[i] * comps[c]`` with index ``i * ncomp + c``."""
    coeffs = np.einsum("fm,c...->fcm...", scalar.coeffs, comps)
    n = len(scalar) * len(comps)
    return PolyBasis(scalar.frame, scalar.degree, coeffs.reshape((n,) + coeffs.shape[2:]))


def _mono(frame, degree, vshape=()):
    return PolyBasis.monomials(frame, degree, vshape)


def _sym_monomials(frame, degree):
    return tensorize(_mono(frame, degree), sym_basis(3)) if degree >= 0 else PolyBasis.empty(frame, (3, 3))


def _dev_monomials(frame, degree):
    return tensorize(_mono(frame, degree), dev_basis()) if degree >= 0 else PolyBasis.empty(frame, (3, 3))


def spanning_set(kind, frame: Frame, ell: int) -> PolyBasis:
    """Generating family obtained by applying the defining operator."""
    kind = SpaceKind(kind)
    d = frame.dim
    if kind is SpaceKind.ROLY:
        if ell < 0:
            return PolyBasis.empty(frame, (2,))
        return curl2(_mono(frame, ell + 1)[1:])
    if kind is SpaceKind.CROLY:
        return mul_x(_mono(frame, ell - 1)) if ell >= 1 else PolyBasis.empty(frame, (2,))
    if kind is SpaceKind.CGOLY:
        if ell < 0:
            return PolyBasis.empty(frame, (2, 2))
        return curl2(_mono(frame, ell + 1, (2,))[2:])
    if kind is SpaceKind.CCGOLY:
        if ell < 1:
            return PolyBasis.empty(frame, (2, 2))
        outer = mul_x(_mono(frame, ell - 1, (2,)))
        return PolyBasis(frame, outer.degree, outer.coeffs - adj2(outer).coeffs)
    if kind is SpaceKind.SROLY:
        if ell < 0:
            return PolyBasis.empty(frame, (3, 3))
        return curl3(_sym_monomials(frame, ell + 1))
    if kind is SpaceKind.CSROLY:
        if ell < 1:
            return PolyBasis.empty(frame, (3, 3))
        return dev(mul_x(_mono(frame, ell - 1, (3,))))
    if kind is SpaceKind.HOLY:
        if ell < 0:
            return PolyBasis.empty(frame, (3, 3))
        return hess(_mono(frame, ell + 2)[4:])
    if kind is SpaceKind.CHOLY:
        if ell < 1:
            return PolyBasis.empty(frame, (3, 3))
        return sym(cross_x(_dev_monomials(frame, ell - 1)))
    pair = {
        SpaceKind.RT: ("Roly", "cRoly", 1),
        SpaceKind.CGTRIM: ("CGoly", "cCGoly", 1),
        SpaceKind.SRTRIM: ("SRoly", "cSRoly", 1),
        SpaceKind.HTRIM: ("Holy", "cHoly", 2),
    }.get(kind)
    if pair is None or d not in (2, 3):
        raise ValueError(f"no spanning set for {kind}")
    first, second, shift = pair
    return concat(spanning_set(first, frame, ell - shift), spanning_set(second, frame, ell))


_DIM_OF_FRAME = {
    SpaceKind.ROLY: 2, SpaceKind.CROLY: 2, SpaceKind.CGOLY: 2, SpaceKind.CCGOLY: 2,
    SpaceKind.RT: 2, SpaceKind.CGTRIM: 2,
    SpaceKind.SROLY: 3, SpaceKind.CSROLY: 3, SpaceKind.HOLY: 3, SpaceKind.CHOLY: 3,
    SpaceKind.SRTRIM: 3, SpaceKind.HTRIM: 3,
}


def decomposition_basis(kind, frame: Frame, ell: int, rule) -> PolyBasis:
    """Orthonormal basis of a decomposition or trimmed space.

    Raises :class:`DimensionMismatch` if the span has the wrong rank.
    """
    kind = SpaceKind(kind)
    if _DIM_OF_FRAME[kind] != frame.dim:
        raise ValueError(f"{kind.value} lives on {_DIM_OF_FRAME[kind]}D entities")
    span = spanning_set(kind, frame, ell)
    return orthonormalize_svd(span, rule, expected=space_dim(kind, ell))
