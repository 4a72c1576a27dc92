"""Independent reference computations the tests check the library against.

Nothing here reuses the adaptive stepper, the history interpolation, or the
quadrature plans: integration is plain fixed-step Euler over a dense grid with
linear interpolation for lagged reads, and kernel tails are bisected on their
closed-form survival functions.
"""

from __future__ import annotations

import numpy as np

from cgnn_lab.exprlang import compile_expr
from cgnn_lab.model import InitialCondition, ModelSpec


def euler_dde(spec: ModelSpec, ic: InitialCondition, t0: float, t_end: float,
              h: float) -> tuple[np.ndarray, np.ndarray]:
    """Fixed-step Euler for models without distributed couplings.

    Lagged reads interpolate linearly between grid values; reads at or before
    t0 evaluate phi directly.  Returns (times, states).
    """
    if spec.couplings_d:
        raise ValueError("euler oracle only covers discrete-delay models")
    n = spec.n
    steps = int(round((t_end - t0) / h))
    ts = t0 + h * np.arange(steps + 1)
    xs = np.empty((steps + 1, n))

    phi = [compile_expr(e, ("s",), scalar=True) for e in ic.phi]
    a = [compile_expr(s.a, ("t", "u"), scalar=True) for s in spec.amplification]
    b = [compile_expr(s.b, ("t", "u"), scalar=True) for s in spec.self_signal]
    F = [compile_expr(s.F, ("u1", "u2"), scalar=True) for s in spec.outer]
    I = [compile_expr(e, ("t",), scalar=True) for e in spec.inputs]
    c_terms = [
        (t.i, t.j, t.l,
         compile_expr(t.c, ("t",), scalar=True),
         compile_expr(t.h, ("u1", "u2"), scalar=True),
         compile_expr(t.tau.tau, ("t",), scalar=True),
         compile_expr(t.tau_tilde.tau, ("t",), scalar=True))
        for t in spec.couplings_c
    ]

    xs[0] = [phi[c](0.0) for c in range(n)]

    def lookup(q: float, upto: int) -> np.ndarray:
        if q <= t0:
            return np.array([phi[c](q - t0) for c in range(n)])
        pos = (q - t0) / h
        k = min(int(pos), upto - 1)
        w = pos - k
        return (1.0 - w) * xs[k] + w * xs[k + 1] if k + 1 <= upto else xs[upto]

    for k in range(steps):
        t = ts[k]
        x = xs[k]
        U = [0.0] * n
        for i, j, l, c_fn, h_fn, tau_fn, taut_fn in c_terms:
            xj = lookup(t - tau_fn(t), k)[j]
            xl = lookup(t - taut_fn(t), k)[l]
            U[i] += c_fn(t) * h_fn(xj, xl)
        dx = np.array([
            a[i](t, x[i]) * (-b[i](t, x[i]) + F[i](U[i], 0.0) + I[i](t))
            for i in range(n)
        ])
        xs[k + 1] = x + h * dx
        if np.max(np.abs(xs[k + 1])) > 1e9:  # divergent demo support
            return ts[: k + 2], xs[: k + 2]
    return ts, xs


def bisect_root(fn, lo: float, hi: float, iters: int = 200) -> float:
    """Root of a decreasing-crossing function by plain bisection."""
    flo = fn(lo)
    fhi = fn(hi)
    if flo * fhi > 0:
        raise ValueError("root not bracketed")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if flo * fn(mid) <= 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
