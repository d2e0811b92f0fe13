"""Constraint families, residuals and gradients.

Every constraint describes one set ``S_i = {x : f_i(x) = 0}`` (or ``f_i(x) <= 0``
for the inequality families). Vectors are plain 1-D numpy arrays; complex
problems use ``complex128`` and gradients follow the real-embedding
convention: for ``x = u + jv`` the returned complex vector ``g`` holds
``df/du`` in its real part and ``df/dv`` in its imaginary part.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

EQUALITY = "equality"
INEQUALITY = "inequality"


class DimensionError(ValueError):
    pass


class InvalidConstraintError(ValueError):
    pass


class UnsupportedFamilyError(ValueError):
    pass


def as_vector(x, dtype=None) -> np.ndarray:
    """Copy ``x`` into a finite 1-D array."""
    arr = np.array(x, dtype=dtype)
    if arr.ndim != 1:
        raise DimensionError(f"expected a 1-D vector, got shape {arr.shape}")
    if arr.size == 0:
        raise DimensionError("vector must have positive dimension")
    if not np.all(np.isfinite(arr)):
        raise ValueError("vector has non-finite entries")
    if not np.iscomplexobj(arr):
        arr = arr.astype(float, copy=False)
    return arr


def _real_vector(a, name: str) -> np.ndarray:
    v = as_vector(a)
    if np.iscomplexobj(v):
        raise InvalidConstraintError(f"{name} must be real")
    return v


def embed(v: np.ndarray) -> np.ndarray:
    """Real embedding ``[Re v; Im v]`` of a complex vector; real input is returned as is."""
    v = np.asarray(v)
    if np.iscomplexobj(v):
        return np.concatenate([v.real, v.imag])
    return v


def unembed(v: np.ndarray, n: int) -> np.ndarray:
    return v[:n] + 1j * v[n:]


def first_basis_vector(n: int, dtype=float) -> np.ndarray:
    e = np.zeros(n, dtype=dtype)
    e[0] = 1.0
    return e


def _check_dim(spec, x: np.ndarray) -> None:
    if x.ndim != 1 or x.shape[0] != spec.dim:
        raise DimensionError(
            f"{type(spec).__name__} expects dimension {spec.dim}, got {x.shape}"
        )


@dataclass(frozen=True, eq=False)
class Hyperplane:
    """``a^T x = b``."""

    a: np.ndarray
    b: float
    relation = EQUALITY

    def __post_init__(self):
        a = _real_vector(self.a, "a")
        if not np.any(a):
            raise InvalidConstraintError("hyperplane normal a must be nonzero")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", float(self.b))

    @property
    def dim(self) -> int:
        return self.a.shape[0]

    @cached_property
    def a_norm2(self) -> float:
        return float(self.a @ self.a)

    def residual(self, x):
        return float(self.a @ x - self.b)

    def gradient(self, x):
        return self.a.copy()


@dataclass(frozen=True, eq=False)
class HalfSpace(Hyperplane):
    """``a^T x <= b``."""

    relation = INEQUALITY


@dataclass(frozen=True, eq=False)
class Sphere:
    """``||x - c||^2 = r^2``, or ``||x - c|| = r`` when ``squared`` is False."""

    c: np.ndarray
    r: float
    squared: bool = True
    relation = EQUALITY

    def __post_init__(self):
        object.__setattr__(self, "c", _real_vector(self.c, "c"))
        r = float(self.r)
        if not (np.isfinite(r) and r > 0):
            raise InvalidConstraintError(f"radius must be positive, got {self.r}")
        object.__setattr__(self, "r", r)

    @property
    def dim(self) -> int:
        return self.c.shape[0]

    def residual(self, x):
        d = x - self.c
        if self.squared:
            return float(d @ d - self.r**2)
        return float(np.linalg.norm(d) - self.r)

    def gradient(self, x):
        d = x - self.c
        if self.squared:
            return 2.0 * d
        nd = np.linalg.norm(d)
        if nd == 0:
            return first_basis_vector(self.dim)
        return d / nd


@dataclass(frozen=True, eq=False)
class Ball(Sphere):
    """``||x - c||^2 <= r^2``."""

    relation = INEQUALITY


@dataclass(frozen=True, eq=False)
class EllipsoidSurface:
    """``|a^H x|^2 = b^2`` (``|a^H x| = b`` when ``squared`` is False).

    ``a`` may be complex; this is the phase-retrieval measurement model.
    """

    a: np.ndarray
    b: float
    squared: bool = True
    relation = EQUALITY

    def __post_init__(self):
        a = as_vector(self.a)
        if not np.any(a):
            raise InvalidConstraintError("ellipsoid vector a must be nonzero")
        b = float(self.b)
        if not (np.isfinite(b) and b >= 0):
            raise InvalidConstraintError(f"b must be nonnegative, got {self.b}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def dim(self) -> int:
        return self.a.shape[0]

    @cached_property
    def a_norm2(self) -> float:
        return float(np.vdot(self.a, self.a).real)

    def inner(self, x):
        w = np.vdot(self.a, x)
        return w if np.iscomplexobj(w) else float(w)

    def residual(self, x):
        w = abs(self.inner(x))
        if self.squared:
            return float(w * w - self.b**2)
        return float(w - self.b)

    def gradient(self, x):
        w = self.inner(x)
        if self.squared:
            return 2.0 * w * self.a
        aw = abs(w)
        if aw == 0:
            return self.a.copy()
        return (w / aw) * self.a


@dataclass(frozen=True, eq=False)
class PairwiseDistance:
    """``||x_i - x_j||^2 = r^2`` on a stacked configuration of ``n_points`` points in R^d."""

    i: int
    j: int
    r: float
    d: int
    n_points: int
    relation = EQUALITY

    def __post_init__(self):
        if self.i == self.j:
            raise InvalidConstraintError("pairwise distance needs i != j")
        if self.d < 1 or self.n_points < 2:
            raise InvalidConstraintError("need d >= 1 and at least two points")
        if not (0 <= self.i < self.n_points and 0 <= self.j < self.n_points):
            raise InvalidConstraintError("point index out of range")
        r = float(self.r)
        if not (np.isfinite(r) and r > 0):
            raise InvalidConstraintError(f"distance must be positive, got {self.r}")
        object.__setattr__(self, "r", r)

    @property
    def dim(self) -> int:
        return self.n_points * self.d

    def block(self, k: int) -> slice:
        return slice(k * self.d, (k + 1) * self.d)

    def residual(self, x):
        diff = x[self.block(self.i)] - x[self.block(self.j)]
        return float(diff @ diff - self.r**2)

    def gradient(self, x):
        diff = x[self.block(self.i)] - x[self.block(self.j)]
        g = np.zeros(self.dim)
        g[self.block(self.i)] = 2.0 * diff
        g[self.block(self.j)] = -2.0 * diff
        return g


@dataclass(frozen=True, eq=False)
class Subspace:
    """Column span of ``A`` (n x n_c, full column rank).

    The residual is the Euclidean distance to the subspace; the orthogonal
    projector is built once here and reused.
    """

    A: np.ndarray
    relation = EQUALITY
    projector: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        if A.ndim == 1:
            A = A[:, None]
        if A.ndim != 2 or A.shape[1] > A.shape[0]:
            raise InvalidConstraintError(f"A must be n x n_c with n_c <= n, got {A.shape}")
        if not np.all(np.isfinite(A)):
            raise InvalidConstraintError("A has non-finite entries")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "projector", subspace_projector(A))

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def residual(self, x):
        return float(np.linalg.norm(x - self.projector @ x))

    def gradient(self, x):
        d = x - self.projector @ x
        nd = np.linalg.norm(d)
        if nd == 0:
            return np.zeros(self.dim)
        return d / nd


def subspace_projector(A: np.ndarray) -> np.ndarray:
    """``A A^+`` as ``Q Q^T`` from the left singular vectors; raises for rank-deficient ``A``.

    Avoids the normal equations, which square the condition number of ``A``.
    """
    Q, s, _ = np.linalg.svd(A, full_matrices=False)
    if s.size == 0 or s[-1] <= 1e-12 * max(s[0], 1.0):
        raise InvalidConstraintError("subspace basis A must have full column rank")
    return Q @ Q.T


CONSTRAINT_TYPES = (Hyperplane, Sphere, EllipsoidSurface, PairwiseDistance, Subspace)


def residual(spec, x) -> float:
    """Value of ``f_i(x)``; for a subspace, the distance to it."""
    x = np.asarray(x)
    _check_dim(spec, x)
    return spec.residual(x)


def gradient(spec, x) -> np.ndarray:
    x = np.asarray(x)
    _check_dim(spec, x)
    return spec.gradient(x)


def gradient_norm_at_solution(spec) -> float:
    """Closed-form ``||grad f_i(x*)||_2`` that needs no knowledge of ``x*``.

    The elliptic entries are the tabulated values, which use the Wirtinger
    convention and differ from ``||gradient(spec, x*)||`` (2 b ||a|| and ||a||).
    Uniform factors do not affect the rules that consume these norms.
    """
    if isinstance(spec, Hyperplane):
        return float(np.sqrt(spec.a_norm2))
    if isinstance(spec, Sphere):
        return 2.0 * spec.r if spec.squared else 1.0
    if isinstance(spec, EllipsoidSurface):
        return spec.b * float(np.sqrt(spec.a_norm2)) if spec.squared else 0.5
    if isinstance(spec, PairwiseDistance):
        return 2.0 * np.sqrt(2.0) * spec.r
    raise UnsupportedFamilyError(
        f"no closed-form gradient norm for {type(spec).__name__}"
    )


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """A system ``f(x) = 0`` / ``f(x) <= 0`` given as a list of constraints."""

    dim: int
    constraints: tuple
    field: str = "real"
    known_solution: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.field not in ("real", "complex"):
            raise ValueError(f"field must be 'real' or 'complex', got {self.field!r}")
        if self.dim < 1:
            raise DimensionError("dimension must be positive")
        cons = tuple(self.constraints)
        if not cons:
            raise ValueError("a problem needs at least one constraint")
        for k, c in enumerate(cons):
            if not isinstance(c, CONSTRAINT_TYPES):
                raise TypeError(f"constraint {k} has unknown type {type(c).__name__}")
            if c.dim != self.dim:
                raise DimensionError(
                    f"constraint {k} has dimension {c.dim}, problem has {self.dim}"
                )
        object.__setattr__(self, "constraints", cons)
        if self.known_solution is not None:
            xs = as_vector(self.known_solution, complex if self.is_complex else float)
            if xs.shape[0] != self.dim:
                raise DimensionError("known solution has wrong dimension")
            object.__setattr__(self, "known_solution", xs)
            for k, c in enumerate(cons):
                f = c.residual(xs)
                bad = f > 1e-9 if c.relation == INEQUALITY else abs(f) > 1e-9
                if bad:
                    raise ValueError(f"known solution violates constraint {k}: f = {f:.3e}")

    @property
    def m(self) -> int:
        return len(self.constraints)

    @property
    def is_complex(self) -> bool:
        return self.field == "complex"

    @cached_property
    def _evaluator(self) -> "_BatchResidual":
        return _BatchResidual(self.constraints, self.dim)

    def residuals(self, x: np.ndarray) -> np.ndarray:
        """Vectorized ``residual_vector`` without argument checking."""
        return self._evaluator(x)


def residual_vector(problem: ProblemInstance, x) -> np.ndarray:
    """All ``m`` residuals, positive part taken for inequalities."""
    x = np.asarray(x)
    if x.ndim != 1 or x.shape[0] != problem.dim:
        raise DimensionError(f"expected dimension {problem.dim}, got {x.shape}")
    return problem.residuals(x)


class _BatchResidual:
    # Groups constraints by family so one residual sweep is a few matvecs.

    def __init__(self, constraints: Sequence, n: int):
        self.m = len(constraints)
        groups: dict = {}
        for k, c in enumerate(constraints):
            if isinstance(c, Hyperplane):
                key = "linear"
            elif isinstance(c, Sphere):
                key = "sphere2" if c.squared else "sphere1"
            elif isinstance(c, EllipsoidSurface):
                key = "ellipse2" if c.squared else "ellipse1"
            elif isinstance(c, PairwiseDistance):
                key = "pair"
            else:
                key = "other"
            groups.setdefault(key, []).append(k)
        self.parts = []
        for key, idx in groups.items():
            cs = [constraints[k] for k in idx]
            idx = np.array(idx)
            if key == "linear":
                data = (np.array([c.a for c in cs]), np.array([c.b for c in cs]))
            elif key in ("sphere2", "sphere1"):
                C = np.array([c.c for c in cs])
                r = np.array([c.r for c in cs])
                data = (C, np.einsum("ij,ij->i", C, C), r)
            elif key in ("ellipse2", "ellipse1"):
                Ah = np.array([np.conj(c.a) for c in cs])
                data = (Ah, np.array([c.b for c in cs]))
            elif key == "pair":
                d = cs[0].d
                data = (
                    np.array([c.i for c in cs]),
                    np.array([c.j for c in cs]),
                    np.array([c.r for c in cs]) ** 2,
                    d,
                )
            else:
                data = cs
            self.parts.append((key, idx, data))
        ineq = np.array([c.relation == INEQUALITY for c in constraints])
        self.ineq = ineq if ineq.any() else None

    def __call__(self, x: np.ndarray) -> np.ndarray:
        out = np.empty(self.m)
        for key, idx, data in self.parts:
            if key == "linear":
                A, b = data
                out[idx] = A @ x - b
            elif key == "sphere2":
                C, cc, r = data
                out[idx] = (x @ x) - 2.0 * (C @ x) + cc - r * r
            elif key == "sphere1":
                C, cc, r = data
                out[idx] = np.sqrt(np.maximum((x @ x) - 2.0 * (C @ x) + cc, 0.0)) - r
            elif key == "ellipse2":
                Ah, b = data
                w = np.abs(Ah @ x)
                out[idx] = w * w - b * b
            elif key == "ellipse1":
                Ah, b = data
                out[idx] = np.abs(Ah @ x) - b
            elif key == "pair":
                I, J, r2, d = data
                X = x.reshape(-1, d)
                diff = X[I] - X[J]
                out[idx] = np.einsum("ij,ij->i", diff, diff) - r2
            else:
                out[idx] = [c.residual(x) for c in data]
        if self.ineq is not None:
            out[self.ineq] = np.maximum(out[self.ineq], 0.0)
        return out
