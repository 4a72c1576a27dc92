"""Right-hand side assembly and adaptive integration of the delayed system.

Lag terms are served through the dense history: there is no method of steps
here because the discrete delays have no positive lower bound (they may even
vanish), and the distributed delays reach over the entire past.  Whenever a
delayed argument lands inside the step being computed, the stage values are
recomputed once against the step's own continuous extension.

The stepper is the Bogacki-Shampine embedded 3(2) pair with FSAL; dense output
is the free cubic Hermite interpolant from the accepted endpoint derivatives.
Distributed-delay integrals use fixed Gauss-Legendre panels (8 nodes per unit
length) on the truncated kernel window plus exact point-atom contributions.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .exprlang import compile_expr
from .memory import History, Segment, history_new, history_to_csv
from .model import InitialCondition, ModelSpec

__all__ = [
    "IntegrationError",
    "BlowUpError",
    "StepUnderflowError",
    "IntegratorOptions",
    "QuadraturePlan",
    "Trajectory",
    "build_quadrature_plan",
    "eval_U",
    "eval_V",
    "rhs",
    "integrate",
]


class IntegrationError(RuntimeError):
    pass


class BlowUpError(IntegrationError):
    """State exceeded the guard bound; under H1-H7 this cannot happen, so it
    signals a hypothesis/modeling violation rather than an integrator fault."""

    def __init__(self, t: float, value: float, guard: float):
        super().__init__(
            f"|x| = {value:.6g} exceeded guard bound {guard:.6g} at t = {t:.6g}"
        )
        self.t = t
        self.value = value


class StepUnderflowError(IntegrationError):
    def __init__(self, t: float, h: float, h_min: float):
        super().__init__(f"step size {h:.3g} fell below h_min {h_min:.3g} at t = {t:.6g}")
        self.t = t


@dataclass(frozen=True)
class IntegratorOptions:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    h_init: float = 1e-3
    h_min: float = 1e-12
    h_max: float = 1.0
    eps_tail: float = 1e-9
    m_guard: float = 1e6
    adaptive: bool = True
    truncate_memory: bool = False

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "h_init", "h_min", "h_max",
                     "eps_tail", "m_guard"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not self.h_min <= self.h_init <= self.h_max:
            raise ValueError("need h_min <= h_init <= h_max")


@dataclass(frozen=True)
class QuadraturePlan:
    """Per distributed coupling: truncated node/weight sets for both kernels,
    aligned with spec.couplings_d."""

    eps_tail: float
    cutoffs: tuple[tuple[float, float], ...]
    nodes: tuple[tuple[np.ndarray, np.ndarray], ...]
    nodes_tilde: tuple[tuple[np.ndarray, np.ndarray], ...]

    @property
    def max_cutoff(self) -> float:
        return max((max(a, b) for a, b in self.cutoffs), default=0.0)


def build_quadrature_plan(spec: ModelSpec, eps_tail: float = 1e-9) -> QuadraturePlan:
    cutoffs, nodes, nodes_tilde = [], [], []
    for term in spec.couplings_d:
        T = term.kernel.tail_cutoff(eps_tail)
        Tt = term.kernel_tilde.tail_cutoff(eps_tail)
        cutoffs.append((T, Tt))
        nodes.append(term.kernel.quad_nodes(T))
        nodes_tilde.append(term.kernel_tilde.quad_nodes(Tt))
    return QuadraturePlan(
        eps_tail=eps_tail,
        cutoffs=tuple(cutoffs),
        nodes=tuple(nodes),
        nodes_tilde=tuple(nodes_tilde),
    )


# ---------------------------------------------------------------------------
# Compiled model functions (cached per spec; specs are immutable)

class _CompiledModel:
    """Scalar (math-module) callables for the per-component hot path; the
    distributed-delay activations stay numpy-vectorized over quadrature nodes."""

    def __init__(self, spec: ModelSpec):
        self.spec = spec
        self.n = spec.n
        self.a = [compile_expr(s.a, ("t", "u"), scalar=True) for s in spec.amplification]
        self.b = [compile_expr(s.b, ("t", "u"), scalar=True) for s in spec.self_signal]
        self.F = [compile_expr(s.F, ("u1", "u2"), scalar=True) for s in spec.outer]
        self.I = [compile_expr(e, ("t",), scalar=True) for e in spec.inputs]
        self.c_terms = [
            (
                term.i, term.j, term.l,
                compile_expr(term.c, ("t",), scalar=True),
                compile_expr(term.h, ("u1", "u2"), scalar=True),
                compile_expr(term.tau.tau, ("t",), scalar=True),
                compile_expr(term.tau_tilde.tau, ("t",), scalar=True),
            )
            for term in spec.couplings_c
        ]
        self.d_terms = [
            (
                term.i, term.j, term.l,
                compile_expr(term.d, ("t",), scalar=True),
                compile_expr(term.f, ("u1", "u2"), scalar=True),
                compile_expr(term.g, ("u",)),
                compile_expr(term.g_tilde, ("u",)),
            )
            for term in spec.couplings_d
        ]


@lru_cache(maxsize=64)
def _compiled(spec: ModelSpec) -> _CompiledModel:
    return _CompiledModel(spec)


# ---------------------------------------------------------------------------
# Functional evaluation

def _vec(fn, x: np.ndarray) -> np.ndarray:
    """Apply a compiled expression to an array, broadcasting constants."""
    v = np.asarray(fn(x), dtype=float)
    if v.ndim == 0:
        v = np.full(x.shape, float(v))
    return v


def _rhs_at(cm, plan, hist, t, y, ext=None, future_flag=None):
    """Derivative vector at (t, y) with lag terms read from the history (plus
    the provisional extension `ext` when a lag lands inside the current step)."""
    n = cm.n
    U = [0.0] * n
    V = [0.0] * n
    t_now = hist.t_now
    if cm.d_terms and plan is None:
        raise IntegrationError("model has distributed couplings; quadrature plan required")
    try:
        for i, j, l, c_fn, h_fn, tau_fn, taut_fn in cm.c_terms:
            q1 = t - tau_fn(t)
            q2 = t - taut_fn(t)
            if q1 > t or q2 > t:
                raise IntegrationError(f"negative delay at t={t}")
            if future_flag is not None and (q1 > t_now or q2 > t_now):
                future_flag[0] = True
            xj = hist.sample(q1, ext)[j]
            xl = hist.sample(q2, ext)[l]
            U[i] += c_fn(t) * h_fn(xj, xl)
        for k, (i, j, l, d_fn, f_fn, g_fn, gt_fn) in enumerate(cm.d_terms):
            s, w = plan.nodes[k]
            st, wt = plan.nodes_tilde[k]
            if future_flag is not None and t > t_now:
                future_flag[0] = True
            arg1 = float(np.dot(w, _vec(g_fn, hist.sample_many(t + s, ext)[:, j]))) \
                if len(w) else 0.0
            arg2 = float(np.dot(wt, _vec(gt_fn, hist.sample_many(t + st, ext)[:, l]))) \
                if len(wt) else 0.0
            V[i] += d_fn(t) * f_fn(arg1, arg2)
        out = np.empty(n)
        for i in range(n):
            yi = y[i]
            out[i] = cm.a[i](t, yi) * (-cm.b[i](t, yi) + cm.F[i](U[i], V[i]) + cm.I[i](t))
    except (ValueError, OverflowError, ZeroDivisionError) as exc:
        raise IntegrationError(f"model function failed at t={t}: {exc}") from None
    if not np.all(np.isfinite(out)):
        raise IntegrationError(f"non-finite derivative at t={t}: {out}")
    return out


def eval_U(spec: ModelSpec, i: int, t: float, h: History) -> float:
    """Discrete-delay functional for neuron i (1-based) at time t <= t_now."""
    cm = _compiled(spec)
    total = 0.0
    for ti, j, l, c_fn, h_fn, tau_fn, taut_fn in cm.c_terms:
        if ti != i - 1:
            continue
        xj = h.sample(t - float(tau_fn(t)))[j]
        xl = h.sample(t - float(taut_fn(t)))[l]
        total += float(c_fn(t)) * float(h_fn(xj, xl))
    return total


def eval_V(spec: ModelSpec, i: int, t: float, h: History,
           plan: QuadraturePlan | None = None) -> float:
    """Distributed-delay functional for neuron i (1-based) at time t <= t_now."""
    cm = _compiled(spec)
    if plan is None:
        plan = build_quadrature_plan(spec)
    total = 0.0
    for k, (ti, j, l, d_fn, f_fn, g_fn, gt_fn) in enumerate(cm.d_terms):
        if ti != i - 1:
            continue
        s, w = plan.nodes[k]
        st, wt = plan.nodes_tilde[k]
        arg1 = float(np.dot(w, _vec(g_fn, h.sample_many(t + s)[:, j]))) if len(w) else 0.0
        arg2 = float(np.dot(wt, _vec(gt_fn, h.sample_many(t + st)[:, l]))) if len(wt) else 0.0
        total += float(d_fn(t)) * float(f_fn(arg1, arg2))
    return total


def rhs(spec: ModelSpec, t: float, h: History,
        plan: QuadraturePlan | None = None) -> np.ndarray:
    """Derivative vector at a time already covered by the history."""
    if plan is None and spec.couplings_d:
        plan = build_quadrature_plan(spec)
    y = h.sample(t)
    return _rhs_at(_compiled(spec), plan, h, t, y)


# ---------------------------------------------------------------------------
# Bogacki-Shampine 3(2)

_C2, _C3 = 0.5, 0.75
_A21 = 0.5
_A32 = 0.75
_B1, _B2, _B3 = 2.0 / 9.0, 1.0 / 3.0, 4.0 / 9.0
# y1 - yhat1 coefficients on (k1, k2, k3, k4)
_E1, _E2, _E3, _E4 = (
    2.0 / 9.0 - 7.0 / 24.0,
    1.0 / 3.0 - 1.0 / 4.0,
    4.0 / 9.0 - 1.0 / 3.0,
    -1.0 / 8.0,
)


@dataclass
class Trajectory:
    """Frozen integration result; sampling goes through the stored history."""

    history: History
    t0: float
    t_end: float
    accepted_steps: int
    rejected_steps: int
    max_abs_state: float
    wall_clock: float

    def sample(self, t: float) -> np.ndarray:
        return self.history.sample(t)

    def sample_many(self, ts: np.ndarray) -> np.ndarray:
        return self.history.sample_many(ts)

    @property
    def n(self) -> int:
        return self.history.n

    def to_csv(self) -> str:
        return history_to_csv(self.history)

    def run_report(self) -> str:
        lines = [
            f"t0 = {self.t0!r}",
            f"t_end = {self.t_end!r}",
            f"components = {self.n}",
            f"accepted_steps = {self.accepted_steps}",
            f"rejected_steps = {self.rejected_steps}",
            f"max_abs_state = {self.max_abs_state!r}",
            f"wall_clock_s = {self.wall_clock:.3f}",
        ]
        return "\n".join(lines) + "\n"


def integrate(spec: ModelSpec, phi: InitialCondition, t0: float, t_end: float,
              opts: IntegratorOptions | None = None) -> Trajectory:
    """Integrate the system from x_{t0} = phi up to t_end."""
    if t_end <= t0:
        raise ValueError(f"need t_end > t0, got [{t0}, {t_end}]")
    if len(phi.phi) != spec.n:
        raise ValueError(f"phi has {len(phi.phi)} components, model has {spec.n}")
    opts = opts or IntegratorOptions()

    started = time.perf_counter()
    cm = _compiled(spec)
    plan = build_quadrature_plan(spec, opts.eps_tail) if spec.couplings_d else None
    kernel_horizon = plan.max_cutoff if plan is not None else 0.0
    hist = history_new(phi.phi, t0, phi.bound,
                       check_horizon=max(30.0, kernel_horizon + 5.0))

    t = t0
    y = hist.sample(t0)
    f = _rhs_at(cm, plan, hist, t, y)
    h = min(opts.h_init, t_end - t0)
    accepted = rejected = 0
    max_abs = float(np.max(np.abs(y)))
    max_delay_seen = 0.0

    while t < t_end:
        h = min(h, t_end - t)
        t_next = t + h

        future = [False]
        lin_ext = Segment(t, t_next, y, y + h * f, f, f)
        k1 = f
        k2 = _rhs_at(cm, plan, hist, t + _C2 * h, y + h * _A21 * k1, lin_ext, future)
        k3 = _rhs_at(cm, plan, hist, t + _C3 * h, y + h * _A32 * k2, lin_ext, future)
        y1 = y + h * (_B1 * k1 + _B2 * k2 + _B3 * k3)
        k4 = _rhs_at(cm, plan, hist, t_next, y1, lin_ext, future)

        if future[0]:
            # a lag fell inside this step: one fixed-point sweep against the
            # step's own Hermite extension (required when delays vanish)
            ext = Segment(t, t_next, y, y1, f, k4)
            k2 = _rhs_at(cm, plan, hist, t + _C2 * h, y + h * _A21 * k1, ext)
            k3 = _rhs_at(cm, plan, hist, t + _C3 * h, y + h * _A32 * k2, ext)
            y1 = y + h * (_B1 * k1 + _B2 * k2 + _B3 * k3)
            ext = Segment(t, t_next, y, y1, f, k4)
            k4 = _rhs_at(cm, plan, hist, t_next, y1, ext)

        err = h * (_E1 * k1 + _E2 * k2 + _E3 * k3 + _E4 * k4)
        scale = opts.abs_tol + opts.rel_tol * np.maximum(np.abs(y), np.abs(y1))
        err_norm = float(np.max(np.abs(err) / scale))

        if opts.adaptive and err_norm > 1.0:
            rejected += 1
            if h <= opts.h_min * (1.0 + 1e-12):
                raise StepUnderflowError(t, h, opts.h_min)
            h = max(h * max(0.2, 0.9 * err_norm ** (-1.0 / 3.0)), opts.h_min)
            continue

        hist.append_segment(Segment(t, t_next, y, y1, f, k4))
        accepted += 1
        t, y, f = t_next, y1, k4
        max_abs = max(max_abs, float(np.max(np.abs(y1))))
        if max_abs > opts.m_guard:
            raise BlowUpError(t, max_abs, opts.m_guard)

        if opts.truncate_memory:
            for term_fns in cm.c_terms:
                max_delay_seen = max(
                    max_delay_seen, float(term_fns[5](t)), float(term_fns[6](t))
                )
            hist.protected_span = kernel_horizon + max_delay_seen
            floor = t - hist.protected_span
            if floor > t0:
                hist.truncate_before(floor)

        if opts.adaptive:
            factor = 5.0 if err_norm == 0.0 else min(
                5.0, max(0.2, 0.9 * err_norm ** (-1.0 / 3.0))
            )
            h = min(max(h * factor, opts.h_min), opts.h_max)

    return Trajectory(
        history=hist,
        t0=t0,
        t_end=t_end,
        accepted_steps=accepted,
        rejected_steps=rejected,
        max_abs_state=max_abs,
        wall_clock=time.perf_counter() - started,
    )
