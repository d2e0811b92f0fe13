"""Local convergence-rate analysis at a solution ``x*``.

The matrices here are real. Complex problems are analysed in the real
``2n`` embedding. Problems with a continuous solution symmetry (global phase
for phase retrieval, rigid motions for distance geometry) have a known
kernel in ``U^T``. They are analysed on its orthogonal complement, and the
kernel dimension is reported.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import minimize

from .core import (
    INEQUALITY,
    PairwiseDistance,
    ProblemInstance,
    as_vector,
    embed,
    unembed,
)
from .projections import project
from .selection import Rule


class RankDeficientError(ValueError):
    pass


@dataclass(frozen=True)
class Interval:
    lower: float
    upper: float

    def __contains__(self, value) -> bool:
        return self.lower <= value <= self.upper

    def as_dict(self) -> dict:
        return {"lower": self.lower, "upper": self.upper}


# ---------------------------------------------------------------- matrices


def build_G(problem: ProblemInstance, x_star) -> np.ndarray:
    """Gradients at ``x_star`` as columns (the transposed Jacobian), real-embedded."""
    x_star = np.asarray(x_star)
    cols = [embed(c.gradient(x_star)) for c in problem.constraints]
    return np.array(cols, dtype=float).T


def build_U(problem: ProblemInstance, x_star) -> np.ndarray:
    """Column-normalized gradients at ``x_star``."""
    _require_feasible(problem, x_star)
    G = build_G(problem, x_star)
    norms = np.linalg.norm(G, axis=0)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        i = int(zero[0])
        raise RankDeficientError(
            f"gradient of constraint {i} ({type(problem.constraints[i]).__name__}) vanishes at x*"
        )
    return G / norms


def _require_feasible(problem, x_star, tol=1e-8):
    x_star = np.asarray(x_star)
    for k, c in enumerate(problem.constraints):
        f = c.residual(x_star)
        if (f > tol) if c.relation == INEQUALITY else (abs(f) > tol):
            raise ValueError(f"x* is not feasible for constraint {k} (f = {f:.3e})")


def symmetry_kernel(problem: ProblemInstance, x_star) -> Optional[np.ndarray]:
    """Orthonormal basis of the known solution-symmetry directions at ``x_star``, or None."""
    x_star = np.asarray(x_star)
    if problem.is_complex:
        v = embed(1j * x_star.astype(complex))
        return (v / np.linalg.norm(v))[:, None]
    cons = problem.constraints
    if all(isinstance(c, PairwiseDistance) for c in cons):
        d = cons[0].d
        X = x_star.reshape(-1, d)
        gens = []
        for a in range(d):
            T = np.zeros_like(X)
            T[:, a] = 1.0
            gens.append(T.ravel())
            for b in range(a + 1, d):
                R = np.zeros_like(X)
                R[:, a] = X[:, b]
                R[:, b] = -X[:, a]
                gens.append(R.ravel())
        Q, s, _ = np.linalg.svd(np.array(gens).T, full_matrices=False)
        return Q[:, s > 1e-10 * s[0]]
    return None


def quotient(M: np.ndarray, kernel: Optional[np.ndarray]) -> np.ndarray:
    """Coordinates of the columns of ``M`` in an orthonormal basis of ``kernel``'s complement."""
    if kernel is None:
        return M
    Q = null_space(kernel.T)
    return Q.T @ M


# ---------------------------------------------------------------- conditioning


def sigma_min(M: np.ndarray) -> float:
    """Smallest singular value of an ``n x m`` matrix (``m >= n``) via the ``n x n`` Gram matrix.

    Uses LAPACK's symmetric eigensolver (``numpy.linalg.eigvalsh``), which is
    deterministic for a given input.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] > M.shape[1]:
        return 0.0
    lam = np.linalg.eigvalsh(M @ M.T)[0]
    return float(np.sqrt(max(lam, 0.0)))


def condition_number(M) -> float:
    """``||M||_F / sigma_min(M)``."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    fro = float(np.linalg.norm(M))
    if fro == 0:
        raise ValueError("condition number of a zero matrix is undefined")
    s = sigma_min(M)
    if s < 1e-14 * fro:
        raise RankDeficientError(f"matrix is ill-conditioned: sigma_min = {s:.3e}, ||M||_F = {fro:.3e}")
    return fro / s


def l2inf_norm(G: np.ndarray) -> float:
    """Largest column 2-norm of ``G``, i.e. ``||G^T||_{2,inf}``."""
    return float(np.max(np.linalg.norm(G, axis=0)))


# ---------------------------------------------------------------- Hoffman constant


def _max_abs_ratio(Mt, v):
    return float(np.max(np.abs(Mt @ v)) / np.linalg.norm(v))


def _smooth_descent(Mt, v0, powers=(8, 32, 128, 512)):
    # p-norm surrogate of max_i |row_i . v| / ||v||, minimized with increasing p
    v = v0 / np.linalg.norm(v0)

    def fun(v, p):
        s = np.linalg.norm(v)
        y = Mt @ v
        z = y / s
        az = np.abs(z)
        zmax = az.max()
        if zmax == 0:
            return 0.0, np.zeros_like(v)
        q = (az / zmax) ** p
        S = q.sum()
        F = np.log(zmax) + np.log(S) / p
        w = q / az.clip(min=1e-300) * np.sign(z) / S
        grad = (Mt.T @ w) / s - (w @ y) * v / s**3
        return F, grad

    for p in powers:
        res = minimize(fun, v, args=(p,), jac=True, method="L-BFGS-B", options={"maxiter": 500})
        v = res.x / np.linalg.norm(res.x)
    return v


def _polish(Mt, v0):
    # local minimax refinement: min t s.t. |Mt v| <= t, ||v|| = 1
    n = Mt.shape[1]
    x0 = np.append(v0 / np.linalg.norm(v0), np.max(np.abs(Mt @ v0)) / np.linalg.norm(v0))
    cons = [
        {"type": "ineq", "fun": lambda x: x[-1] - Mt @ x[:-1], "jac": lambda x: np.hstack([-Mt, np.ones((Mt.shape[0], 1))])},
        {"type": "ineq", "fun": lambda x: x[-1] + Mt @ x[:-1], "jac": lambda x: np.hstack([Mt, np.ones((Mt.shape[0], 1))])},
        {"type": "eq", "fun": lambda x: x[:-1] @ x[:-1] - 1.0, "jac": lambda x: np.append(2 * x[:-1], 0.0)},
    ]
    obj_grad = np.zeros(n + 1)
    obj_grad[-1] = 1.0
    res = minimize(
        lambda x: x[-1], x0, jac=lambda x: obj_grad, constraints=cons, method="SLSQP",
        options={"maxiter": 200, "ftol": 1e-14},
    )
    v = res.x[:-1]
    if not np.all(np.isfinite(v)) or np.linalg.norm(v) == 0:
        return v0
    return v


def _sphere_grid(n, size):
    if n == 1:
        return np.array([[1.0]])
    if n == 2:
        t = np.linspace(0.0, np.pi, size, endpoint=False)
        return np.column_stack([np.cos(t), np.sin(t)])
    # Fibonacci lattice on S^2; antipodal points give the same objective
    k = np.arange(size) + 0.5
    z = 1.0 - 2.0 * k / size
    phi = np.pi * (1.0 + np.sqrt(5.0)) * k
    rr = np.sqrt(1.0 - z * z)
    return np.column_stack([rr * np.cos(phi), rr * np.sin(phi), z])


def hoffman_inf(Mt, restarts: int = 8, seed: int = 0, grid_size: int = 20000, polish: Optional[bool] = None) -> Interval:
    """Bracket ``h_inf(Mt) = min_{||v||=1} ||Mt v||_inf`` for ``Mt`` with ``m`` rows.

    The lower end is ``sigma_min(Mt) / sqrt(m)``. The upper end is the best
    objective value found. The search uses a smoothed descent from ``restarts``
    random starts plus the smallest singular direction, and a sphere grid
    when ``n <= 3``. The best point is then refined by a local minimax solve.
    """
    Mt = np.atleast_2d(np.asarray(Mt, dtype=float))
    m, n = Mt.shape
    if m < n:
        raise RankDeficientError(f"{m} rows cannot have rank {n}")
    gram = Mt.T @ Mt
    lam, vecs = np.linalg.eigh(gram)
    smin = float(np.sqrt(max(lam[0], 0.0)))
    if smin < 1e-14 * float(np.linalg.norm(Mt)):
        raise RankDeficientError("Hoffman constant is zero for a rank-deficient matrix")
    lower = smin / np.sqrt(m)

    rng = np.random.default_rng(seed)
    starts = [vecs[:, 0]] + [rng.standard_normal(n) for _ in range(restarts)]
    candidates = []
    if n <= 3:
        grid = _sphere_grid(n, grid_size)
        vals = np.max(np.abs(grid @ Mt.T), axis=1)
        best = np.argsort(vals)[:4]
        candidates.extend(grid[best])
        starts.extend(grid[best[:2]])
    for v0 in starts:
        candidates.append(_smooth_descent(Mt, v0))
    best_v = min(candidates, key=lambda v: _max_abs_ratio(Mt, v))
    if polish is None:
        polish = n * m <= 200_000
    if polish:
        candidates.append(_polish(Mt, best_v))
    upper = min(_max_abs_ratio(Mt, v) for v in candidates)
    # rounding can put an exact optimum a few ulps below the bound
    return Interval(float(lower), float(max(upper, lower)))


# ---------------------------------------------------------------- rates


def asymptotic_rate(variant, U, G=None, hoffman_U: Optional[Interval] = None, hoffman_G: Optional[Interval] = None):
    """Closed-form asymptotic contraction factor for one selection rule.

    Returns a float for MP, RP and NRP. For NGP and GP it returns an
    :class:`Interval` built from the Hoffman bracket. CP and RPP have no
    closed form, and ``None`` is returned for them; use
    :func:`spectral_contraction_check` for their Jacobian norm.
    """
    variant = Rule(variant)
    if variant in (Rule.MEAN, Rule.RANDOM):
        return float(np.sqrt(1.0 - 1.0 / condition_number(U) ** 2))
    if variant is Rule.NONUNIFORM:
        return float(np.sqrt(1.0 - 1.0 / condition_number(G) ** 2))
    if variant is Rule.NORMALIZED_GREEDY:
        h = hoffman_U or hoffman_inf(U.T)
        return Interval(float(np.sqrt(max(1.0 - h.upper**2, 0.0))), float(np.sqrt(1.0 - h.lower**2)))
    if variant is Rule.GREEDY:
        h = hoffman_G or hoffman_inf(G.T)
        g2 = l2inf_norm(G) ** 2
        return Interval(
            float(np.sqrt(max(1.0 - h.upper**2 / g2, 0.0))),
            float(np.sqrt(1.0 - h.lower**2 / g2)),
        )
    return None


def empirical_rate(errors, window: int) -> float:
    """Per-record contraction factor fitted by least squares on ``log(error)``.

    ``errors`` may be an :class:`~spsolve.solver.IterateTrace` or a sequence.
    The fit uses the last ``window + 1`` records before the error first
    drops to ``1e-14`` or below.
    """
    if hasattr(errors, "errors"):
        if errors.errors is None:
            raise ValueError("trace has no error column")
        errors = errors.errors
    e = np.asarray(errors, dtype=float)
    small = np.flatnonzero(~(e > 1e-14))
    if small.size:
        e = e[: small[0]]
    if window < 1 or e.size < window + 1:
        raise ValueError(f"need at least {window + 1} records above 1e-14, have {e.size}")
    tail = np.log(e[-(window + 1):])
    k = np.arange(window + 1, dtype=float)
    slope = np.polyfit(k, tail, 1)[0]
    return float(np.exp(slope))


# ---------------------------------------------------------------- numerical checks


def _fd_jacobian(fun, x, h, complex_input):
    if complex_input:
        n = x.shape[0]
        xr = embed(x)
        f = lambda v: embed(fun(unembed(v, n)))
    else:
        xr = x
        f = fun
    N = xr.shape[0]
    J = np.empty((N, N))
    for k in range(N):
        e = np.zeros(N)
        e[k] = h
        J[:, k] = (f(xr + e) - f(xr - e)) / (2 * h)
    return J


def projection_jacobian_check(spec, x_star, h: Optional[float] = None) -> float:
    """Max entrywise gap between the finite-difference Jacobian of the projector and ``I - u u^T``."""
    x_star = as_vector(x_star)
    f = spec.residual(x_star)
    if abs(f) > 1e-8 * (1.0 + float(np.linalg.norm(x_star)) ** 2):
        raise ValueError(f"x* is not on the constraint set (f = {f:.3e})")
    g = embed(spec.gradient(x_star))
    ng = np.linalg.norm(g)
    if ng == 0:
        raise ValueError("gradient vanishes at x*")
    u = g / ng
    if h is None:
        h = 1e-5 * (1.0 + float(np.linalg.norm(x_star)))
    J = _fd_jacobian(lambda z: project(spec, z), x_star, h, np.iscomplexobj(x_star))
    return float(np.max(np.abs(J - (np.eye(u.size) - np.outer(u, u)))))


def spectral_contraction_check(problem: ProblemInstance, x_star, variant, rng: Optional[np.random.Generator] = None) -> float:
    """Spectral norm of the closed-form Jacobian of one MP step, CP cycle or RPP cycle at ``x_star``.

    Raises :class:`RankDeficientError` when ``U`` (after removing a known
    symmetry kernel) lacks full row rank.
    """
    variant = Rule(variant)
    if variant not in (Rule.MEAN, Rule.CYCLIC, Rule.PERMUTED):
        raise ValueError("spectral check is defined for mp, cp and rpp")
    U = quotient(build_U(problem, x_star), symmetry_kernel(problem, x_star))
    n, m = U.shape
    if sigma_min(U) < 1e-10:
        raise RankDeficientError("rank(U) < n: the contraction factor is 1")
    # columns of U stay unit length after the quotient because gradients are orthogonal to the kernel
    Un = U / np.linalg.norm(U, axis=0)
    if variant is Rule.MEAN:
        J = np.eye(n) - (Un @ Un.T) / m
    else:
        if variant is Rule.CYCLIC:
            order = range(m)
        else:
            order = (rng or np.random.default_rng(0)).permutation(m)
        J = np.eye(n)
        for i in order:
            u = Un[:, i]
            J = J - np.outer(u, u @ J)
    return float(np.linalg.norm(J, 2))


def greedy_index_agreement(
    problem: ProblemInstance,
    x_star,
    radius: float = 1e-3,
    draws: int = 1000,
    rng: Optional[np.random.Generator] = None,
    normalized: bool = False,
    norms=None,
) -> float:
    """Fraction of near-solution points where the residual-based greedy index
    equals its linearized counterpart.

    Points are drawn uniformly in the ball of radius ``radius * ||x*||``.
    The linearized rule uses ``|grad f_i(x*)^T (x - x*)|``, or
    ``|u_i^T (x - x*)|`` for the normalized variant.
    """
    from .selection import gradient_norms

    rng = rng or np.random.default_rng(0)
    x_star = np.asarray(x_star)
    G = build_G(problem, x_star)
    if normalized:
        G = G / np.linalg.norm(G, axis=0)
        scale = gradient_norms(problem) if norms is None else np.asarray(norms, dtype=float)
    R = radius * float(np.linalg.norm(x_star))
    n = problem.dim
    hits = 0
    for _ in range(draws):
        if problem.is_complex:
            g = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        else:
            g = rng.standard_normal(n)
        N = 2 * n if problem.is_complex else n
        step = R * rng.random() ** (1.0 / N) * g / np.linalg.norm(g)
        x = x_star + step
        res = np.abs(problem.residuals(x))
        if normalized:
            res = res / scale
        lin = np.abs(embed(step) @ G)
        hits += int(np.argmax(res) == np.argmax(lin))
    return hits / draws


# ---------------------------------------------------------------- report


@dataclass
class RateReport:
    U: np.ndarray
    G: np.ndarray
    sigma_min_U: float
    sigma_min_G: float
    kappa_U: float
    kappa_G: float
    hoffman_U: Interval
    hoffman_G: Interval
    l2inf_G: float
    rates: Dict[str, object]
    kernel_dim: int = 0
    empirical: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        rates = {}
        for key, val in self.rates.items():
            rates[key] = val.as_dict() if isinstance(val, Interval) else val
        return {
            "kappa_U": self.kappa_U,
            "kappa_G": self.kappa_G,
            "sigma_min_U": self.sigma_min_U,
            "hoffman_U": self.hoffman_U.as_dict(),
            "hoffman_G": self.hoffman_G.as_dict(),
            "l2inf_G": self.l2inf_G,
            "rates": rates,
            "empirical": dict(self.empirical),
            "kernel_dim": self.kernel_dim,
        }


def rate_report(problem: ProblemInstance, x_star=None, restarts: int = 8, seed: int = 0) -> RateReport:
    """Theoretical rates for every rule with a closed form, evaluated at ``x_star``."""
    if x_star is None:
        x_star = problem.known_solution
    if x_star is None:
        raise ValueError("rate analysis needs a solution x*")
    kernel = symmetry_kernel(problem, x_star)
    U = quotient(build_U(problem, x_star), kernel)
    G = quotient(build_G(problem, x_star), kernel)
    hU = hoffman_inf(U.T, restarts=restarts, seed=seed)
    hG = hoffman_inf(G.T, restarts=restarts, seed=seed)
    rates = {
        r.value: asymptotic_rate(r, U, G, hU, hG)
        for r in (Rule.MEAN, Rule.RANDOM, Rule.NONUNIFORM, Rule.NORMALIZED_GREEDY, Rule.GREEDY)
    }
    return RateReport(
        U=U,
        G=G,
        sigma_min_U=sigma_min(U),
        sigma_min_G=sigma_min(G),
        kappa_U=condition_number(U),
        kappa_G=condition_number(G),
        hoffman_U=hU,
        hoffman_G=hG,
        l2inf_G=l2inf_norm(G),
        rates=rates,
        kernel_dim=0 if kernel is None else kernel.shape[1],
    )
