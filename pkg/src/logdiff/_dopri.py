"""Dormand-Prince 5(4) embedded Runge-Kutta pair with step-size control.

Steps are clipped so that every requested output abscissa is hit exactly;
no dense output is used.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

# Butcher tableau (Dormand & Prince 1980)
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
_E = _B5 - _B4

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0


class IntegrationError(RuntimeError):
    pass


def integrate(
    fun: Callable[[float, np.ndarray], np.ndarray],
    t_out: np.ndarray,
    y0: np.ndarray,
    rtol: float,
    atol: np.ndarray | float,
    admissible: Callable[[np.ndarray], bool] | None = None,
    h0: float | None = None,
    max_steps: int = 1_000_000,
) -> tuple[np.ndarray, dict]:
    """Integrate ``y' = fun(t, y)`` from ``t_out[0]`` through every ``t_out``.

    Parameters
    ----------
    fun : callable
        Right-hand side.
    t_out : array
        Strictly increasing output abscissae; ``t_out[0]`` is the start.
    y0 : array
        State at ``t_out[0]``.
    rtol, atol : float or array
        Mixed error weights, ``atol + rtol*max(|y_old|, |y_new|)`` per component.
    admissible : callable, optional
        Predicate on a trial state. An inadmissible trial step (e.g. a
        nonpositive profile value) is rejected and the step shrunk.

    Returns
    -------
    ys : array, shape (len(t_out), len(y0))
    stats : dict
        Accepted/rejected step counts.
    """
    t_out = np.asarray(t_out, dtype=float)
    y = np.array(y0, dtype=float)
    atol = np.broadcast_to(np.asarray(atol, dtype=float), y.shape)
    ys = np.empty((t_out.size, y.size))
    ys[0] = y
    t = t_out[0]
    f = fun(t, y)
    span = t_out[-1] - t_out[0]
    h = h0 if h0 is not None else 1e-3 * max(span, abs(t), 1e-12)
    accepted = rejected = 0
    k = np.empty((7, y.size))

    for j in range(1, t_out.size):
        t_next = t_out[j]
        while t < t_next:
            if accepted + rejected > max_steps:
                raise IntegrationError(f"step budget exhausted at t={t:.6g}")
            clipped = h >= t_next - t
            step = t_next - t if clipped else h
            if step <= 1e-14 * max(abs(t), 1.0):
                raise IntegrationError(f"step size underflow at t={t:.6g}, y={y}")
            k[0] = f
            for s in range(1, 7):
                k[s] = fun(t + _C[s] * step, y + step * np.dot(_A[s], k[:s]))
            y_new = y + step * np.dot(_B5, k)
            if admissible is not None and not admissible(y_new):
                rejected += 1
                h = 0.25 * step
                continue
            err = step * np.dot(_E, k)
            scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
            err_norm = float(np.sqrt(np.mean((err / scale) ** 2)))
            if not np.isfinite(err_norm):
                rejected += 1
                h = 0.25 * step
                continue
            if err_norm <= 1.0:
                accepted += 1
                t = t_next if clipped else t + step
                y = y_new
                f = k[6]
                factor = MAX_FACTOR if err_norm == 0 else min(
                    MAX_FACTOR, SAFETY * err_norm ** -0.2
                )
                # a clipped step says nothing about how large h could be
                h = max(h, step * factor) if clipped else step * factor
            else:
                rejected += 1
                h = step * max(MIN_FACTOR, SAFETY * err_norm ** -0.2)
        ys[j] = y
    return ys, {"accepted": accepted, "rejected": rejected}
