"""Central finite-difference check of analytic gradients."""

from __future__ import annotations

import numpy as np


class NonFiniteGradient(FloatingPointError):
    pass


def numeric_grad(f, params, name, eps=1e-4):
    """Central differences of scalar ``f(params)`` w.r.t. ``params[name]``."""
    base = params[name]
    grad = np.zeros_like(base, dtype=np.float64)
    flat = grad.reshape(-1)
    for k in range(base.size):
        work = base.astype(np.float64).copy()
        w = work.reshape(-1)
        w[k] += eps
        up = f({**params, name: work})
        w[k] -= 2 * eps
        down = f({**params, name: work})
        flat[k] = (up - down) / (2 * eps)
    return grad


def relative_error(analytic, numeric):
    """``||a - n|| / max(||a||, ||n||, 1e-8)`` over a whole tensor."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    return float(np.linalg.norm(a - n) / max(np.linalg.norm(a), np.linalg.norm(n), 1e-8))


def gradcheck(f, grad_f, params, eps=1e-4, names=None):
    """Compare ``grad_f(params)`` with finite differences of ``f``.

    ``f`` maps a ``{name: array}`` dict to a float, ``grad_f`` maps it to a
    ``{name: gradient}`` dict. Returns ``(max error, {name: error})``.
    """
    params = {k: np.asarray(v, dtype=np.float64) for k, v in params.items()}
    analytic = grad_f(params)
    errors = {}
    for name in (names if names is not None else sorted(params)):
        a = np.asarray(analytic[name], dtype=np.float64)
        n = numeric_grad(f, params, name, eps)
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(n))):
            raise NonFiniteGradient(f"non-finite gradient for {name}")
        errors[name] = relative_error(a, n)
    return (max(errors.values()) if errors else 0.0), errors
