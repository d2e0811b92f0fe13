"""Closed-form Euclidean projections onto the constraint sets.

Degenerate inputs (``z`` at a sphere centre, ``a^H z = 0`` for an ellipsoid,
coincident endpoints of a distance constraint) have no unique nearest point.
They are resolved deterministically: direction ``e_1`` and phase ``0``.
"""
from __future__ import annotations

from functools import singledispatch

import numpy as np

from .core import (
    INEQUALITY,
    Ball,
    DimensionError,
    EllipsoidSurface,
    HalfSpace,
    Hyperplane,
    InvalidConstraintError,
    PairwiseDistance,
    Sphere,
    Subspace,
    UnsupportedFamilyError,
    first_basis_vector,
    subspace_projector,
)


def degeneracy_tol(z: np.ndarray) -> float:
    return 1e-12 * (1.0 + float(np.linalg.norm(z)))


def project_hyperplane(a, b, z, a_norm2=None):
    """``z - (a^T z - b) / ||a||^2 * a``."""
    a = np.asarray(a)
    if a_norm2 is None:
        a_norm2 = float(a @ a)
    if a_norm2 == 0:
        raise InvalidConstraintError("hyperplane normal a must be nonzero")
    return z - ((a @ z - b) / a_norm2) * a


def project_sphere(c, r, z):
    d = z - c
    nd = float(np.linalg.norm(d))
    if nd <= degeneracy_tol(z):
        return c + r * first_basis_vector(len(z), dtype=np.result_type(z, c))
    return c + (r / nd) * d


def project_ellipsoid_surface(a, b, z, a_norm2=None):
    """Nearest point of ``{x : |a^H x| = b}``; works for real and complex data."""
    a = np.asarray(a)
    if a_norm2 is None:
        a_norm2 = float(np.vdot(a, a).real)
    if a_norm2 == 0:
        raise InvalidConstraintError("ellipsoid vector a must be nonzero")
    w = np.vdot(a, z)
    aw = abs(w)
    if aw <= degeneracy_tol(z):
        return z - (b / a_norm2) * a
    return z - ((1.0 - b / aw) * w / a_norm2) * a


def project_subspace(A, z, projector=None):
    """``A A^+ z``. Pass a cached ``projector`` to skip rebuilding it."""
    if projector is None:
        projector = subspace_projector(np.asarray(A, dtype=float))
    return projector @ z


def project_pairwise_distance(i, j, r, d, z):
    """Move points ``i`` and ``j`` symmetrically about their midpoint to distance ``r``."""
    if i == j:
        raise InvalidConstraintError("pairwise distance needs i != j")
    if len(z) % d:
        raise DimensionError(f"dimension {len(z)} is not a multiple of d={d}")
    bi, bj = slice(i * d, (i + 1) * d), slice(j * d, (j + 1) * d)
    zi, zj = z[bi], z[bj]
    diff = zi - zj
    nd = float(np.linalg.norm(diff))
    if nd <= degeneracy_tol(z):
        u = first_basis_vector(d)
    else:
        u = diff / nd
    mid = 0.5 * (zi + zj)
    x = z.copy()
    x[bi] = mid + 0.5 * r * u
    x[bj] = mid - 0.5 * r * u
    return x


def project_sublevel(spec, z):
    """Projection onto ``{x : f(x) <= 0}`` for half-spaces and balls."""
    if not isinstance(spec, (HalfSpace, Ball)):
        raise UnsupportedFamilyError(
            f"no sublevel-set projection for {type(spec).__name__}"
        )
    if spec.residual(z) <= 0:
        return z.copy()
    if isinstance(spec, HalfSpace):
        return project_hyperplane(spec.a, spec.b, z, spec.a_norm2)
    return project_sphere(spec.c, spec.r, z)


@singledispatch
def _project(spec, z):
    raise TypeError(f"cannot project onto {type(spec).__name__}")


@_project.register
def _(spec: Hyperplane, z):
    if spec.relation == INEQUALITY:
        return project_sublevel(spec, z)
    return project_hyperplane(spec.a, spec.b, z, spec.a_norm2)


@_project.register
def _(spec: Sphere, z):
    if spec.relation == INEQUALITY:
        return project_sublevel(spec, z)
    return project_sphere(spec.c, spec.r, z)


@_project.register
def _(spec: EllipsoidSurface, z):
    return project_ellipsoid_surface(spec.a, spec.b, z, spec.a_norm2)


@_project.register
def _(spec: Subspace, z):
    return spec.projector @ z


@_project.register
def _(spec: PairwiseDistance, z):
    return project_pairwise_distance(spec.i, spec.j, spec.r, spec.d, z)


def project(spec, z) -> np.ndarray:
    """Euclidean projection of ``z`` onto the set described by ``spec``."""
    z = np.asarray(z)
    if z.ndim != 1 or z.shape[0] != spec.dim:
        raise DimensionError(
            f"{type(spec).__name__} expects dimension {spec.dim}, got {z.shape}"
        )
    return _project(spec, z)
