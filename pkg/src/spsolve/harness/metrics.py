"""Normalized mean-squared-error metrics."""
from __future__ import annotations

import numpy as np

from ..solver import rigid_align


def _norm2(x_star):
    s = float(np.vdot(x_star, x_star).real)
    if s == 0:
        raise ValueError("NMSE is undefined for x* = 0")
    return s


def nmse(x, x_star) -> float:
    """``||x - x*||^2 / ||x*||^2``."""
    x, x_star = np.asarray(x), np.asarray(x_star)
    d = x - x_star
    return float(np.vdot(d, d).real) / _norm2(x_star)


def nmse_phase_aligned(x, x_star) -> float:
    """NMSE after the best global phase rotation of ``x*``.

    Equals ``(||x||^2 + ||x*||^2 - 2|x*^H x|) / ||x*||^2``; evaluated through
    the aligned difference to avoid cancellation near zero.
    """
    x, x_star = np.asarray(x), np.asarray(x_star)
    ns = _norm2(x_star)
    w = np.vdot(x_star, x)
    rot = w / abs(w) if w != 0 else 1.0
    d = x - rot * x_star
    return float(np.vdot(d, d).real) / ns


def nmse_rigid_aligned(x, x_star, d: int) -> float:
    """NMSE after the best rigid motion (rotation, reflection, translation) of ``x*``."""
    x, x_star = np.asarray(x, dtype=float), np.asarray(x_star, dtype=float)
    ns = _norm2(x_star)
    Y = x.reshape(-1, d)
    diff = Y - rigid_align(Y, x_star.reshape(-1, d))
    return float(np.sum(diff * diff)) / ns
