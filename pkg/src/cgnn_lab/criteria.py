"""Hypothesis checking, the per-neuron stability criterion, and weight search.

Declared constants (amplification range, self-signal slope, Lipschitz
constants of the activation functions) are validated by falsification on
refining sample grids: a pass is always `pass-sampled`, never a certificate,
while a fail carries a concrete witness point.  The stability criterion is the
per-neuron balance

    -a_lo_i (beta_i(t) + A_i(t))
      + sum_terms  zeta_i |c(t)| (a_hi_j (d_j/d_i) gamma1 + a_hi_l (d_l/d_i) gamma2)
      + sum_terms sigma_i |d(t)| (a_hi_j (d_j/d_i) xi mu1 + a_hi_l (d_l/d_i) xi_t mu2)

whose eventual negativity for some positive weight vector d is what the
convergence theory requires; the limsup is estimated as a max over the tail of
a finite grid.  Weight search solves the induced linear feasibility problem
through the spectral radius of the nonnegative matrix diag(beta_floor)^-1 K.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .exprlang import compile_expr, parse_expr
from .model import AsymptoticPair, ModelSpec

__all__ = [
    "SamplingWindows",
    "Witness",
    "HypothesisReport",
    "CriterionCurve",
    "GapCurve",
    "ConvergenceCurve",
    "InfeasibleWeightsError",
    "validate_hypotheses",
    "h7_value",
    "h7_values_on_grid",
    "h7_limsup",
    "find_weights",
    "asymptotic_gap",
    "pair_convergence",
]

HYPOTHESES = ("H1", "H2", "H3", "H4", "H5", "H6", "H7")

_REL_TOL = 1e-9  # slack on declared-constant comparisons
_ABS_TOL = 1e-12


@dataclass(frozen=True)
class SamplingWindows:
    """Where the sampled checks look: t in [0, t_max], states in [-u_max, u_max]."""

    t_max: float = 100.0
    u_max: float = 5.0
    nt: int = 401
    nu: int = 201

    def t_grid(self) -> np.ndarray:
        return np.linspace(0.0, self.t_max, self.nt)

    def u_grid(self) -> np.ndarray:
        return np.linspace(-self.u_max, self.u_max, self.nu)


@dataclass(frozen=True)
class Witness:
    where: str
    point: tuple
    observed: float
    declared: float

    def __str__(self):
        return (f"{self.where} at {self.point}: observed {self.observed:.6g} "
                f"vs declared {self.declared:.6g}")


@dataclass
class HypothesisReport:
    verdicts: dict[str, str] = field(default_factory=dict)
    witnesses: dict[str, Witness] = field(default_factory=dict)
    caveats: list[str] = field(default_factory=list)

    def ok(self) -> bool:
        return all(v != "fail" for v in self.verdicts.values())

    def record(self, hyp: str, witness: Witness | None):
        if witness is None:
            if self.verdicts.get(hyp) != "fail":
                self.verdicts[hyp] = "pass-sampled"
        else:
            self.verdicts[hyp] = "fail"
            self.witnesses.setdefault(hyp, witness)

    def render(self) -> str:
        lines = []
        for hyp in HYPOTHESES:
            verdict = self.verdicts.get(hyp, "not-applicable")
            line = f"{hyp}: {verdict}"
            if hyp in self.witnesses:
                line += f"  [{self.witnesses[hyp]}]"
            lines.append(line)
        for c in self.caveats:
            lines.append(f"note: {c}")
        return "\n".join(lines) + "\n"


def _vec(fn, x: np.ndarray) -> np.ndarray:
    v = np.asarray(fn(x), dtype=float)
    if v.ndim == 0:
        v = np.full(np.shape(x), float(v))
    return v


# ---------------------------------------------------------------------------
# H1-H6 falsification sampling

def _check_bounded(name: str, fn, ts: np.ndarray) -> Witness | None:
    """Sampled necessary condition for boundedness on [0, inf): finite values
    and no monotone growth across the window quarters."""
    vals = np.abs(_vec(fn, ts))
    if not np.all(np.isfinite(vals)):
        bad = int(np.argmax(~np.isfinite(vals)))
        return Witness(name, (float(ts[bad]),), float(vals[bad]), math.inf)
    q = len(ts) // 4
    sups = [float(np.max(vals[k * q:(k + 1) * q])) for k in range(4)]
    growing = all(sups[k + 1] >= 1.2 * sups[k] + _ABS_TOL for k in range(3))
    if growing:
        t_at = float(ts[3 * q + int(np.argmax(vals[3 * q: 4 * q]))])
        return Witness(f"{name} (growth)", (t_at,), sups[3], sups[0])
    return None


def _check_lipschitz_pair(where, fn, cs: tuple[float, float], u_grid, cross, rng):
    """|f(u1,u2)-f(v1,v2)| <= c1|u1-v1| + c2|u2-v2| on axis-adjacent and random pairs."""
    c1, c2 = cs
    for fixed in cross:
        vals = _vec(lambda u: fn(u, fixed), u_grid)
        dv = np.abs(np.diff(vals))
        du = np.diff(u_grid)
        bad = dv > c1 * du * (1 + _REL_TOL) + _ABS_TOL
        if np.any(bad):
            k = int(np.argmax(bad))
            return Witness(f"{where} slot 1", (float(u_grid[k]), float(u_grid[k + 1]), fixed),
                           float(dv[k] / du[k]), c1)
        vals = _vec(lambda u: fn(fixed, u), u_grid)
        dv = np.abs(np.diff(vals))
        bad = dv > c2 * du * (1 + _REL_TOL) + _ABS_TOL
        if np.any(bad):
            k = int(np.argmax(bad))
            return Witness(f"{where} slot 2", (fixed, float(u_grid[k]), float(u_grid[k + 1])),
                           float(dv[k] / du[k]), c2)
    lo, hi = u_grid[0], u_grid[-1]
    pts = rng.uniform(lo, hi, size=(256, 4))
    va = np.asarray(fn(pts[:, 0], pts[:, 1]), dtype=float) + np.zeros(len(pts))
    vb = np.asarray(fn(pts[:, 2], pts[:, 3]), dtype=float) + np.zeros(len(pts))
    lhs = np.abs(va - vb)
    rhs = c1 * np.abs(pts[:, 0] - pts[:, 2]) + c2 * np.abs(pts[:, 1] - pts[:, 3])
    bad = lhs > rhs * (1 + _REL_TOL) + _ABS_TOL
    if np.any(bad):
        k = int(np.argmax(bad))
        return Witness(f"{where} (random pair)", tuple(float(v) for v in pts[k]),
                       float(lhs[k]), float(rhs[k]))
    return None


def _check_lipschitz_one(where, fn, c: float, u_grid):
    vals = _vec(fn, u_grid)
    dv = np.abs(np.diff(vals))
    du = np.diff(u_grid)
    bad = dv > c * du * (1 + _REL_TOL) + _ABS_TOL
    if np.any(bad):
        k = int(np.argmax(bad))
        return Witness(where, (float(u_grid[k]), float(u_grid[k + 1])),
                       float(dv[k] / du[k]), c)
    return None


def validate_hypotheses(spec: ModelSpec,
                        windows: SamplingWindows | None = None) -> HypothesisReport:
    """Machine-check the declared bounds of H1-H6 and the weight existence H7.

    All verdicts are grid-relative: `pass-sampled` means no violation was
    found on the window, not a proof.
    """
    w = windows or SamplingWindows()
    ts = w.t_grid()
    us = w.u_grid()
    cross = [float(v) for v in np.linspace(-w.u_max, w.u_max, 5)]
    rng = np.random.default_rng(20240817)
    report = HypothesisReport()

    # H1: boundedness of c, d, I, and b(., u) for fixed u
    for k, term in enumerate(spec.couplings_c, start=1):
        fn = compile_expr(term.c, ("t",))
        report.record("H1", _check_bounded(f"c[{k}]", fn, ts))
    for k, term in enumerate(spec.couplings_d, start=1):
        fn = compile_expr(term.d, ("t",))
        report.record("H1", _check_bounded(f"d[{k}]", fn, ts))
    for i, e in enumerate(spec.inputs, start=1):
        report.record("H1", _check_bounded(f"I[{i}]", compile_expr(e, ("t",)), ts))
    for i, sig in enumerate(spec.self_signal, start=1):
        b_fn = compile_expr(sig.b, ("t", "u"))
        for u_fix in cross:
            report.record(
                "H1", _check_bounded(f"b[{i}](.,u={u_fix})", lambda t: b_fn(t, u_fix), ts)
            )
    report.caveats.append(
        "H1 checks b(.,u) only on the sampled u window; boundedness per fixed u "
        "over all reals is not finitely checkable."
    )

    # H2: amplification range and the A_i a_i^2 <= da/dt inequality
    t_sub = ts[:: max(1, len(ts) // 60)]
    for i, amp in enumerate(spec.amplification, start=1):
        a_fn = compile_expr(amp.a, ("t", "u"))
        A_fn = compile_expr(amp.A, ("t",))
        witness = None
        for t in t_sub:
            vals = _vec(lambda u: a_fn(t, u), us)
            if np.any(vals < amp.a_lo * (1 - _REL_TOL) - _ABS_TOL):
                k = int(np.argmin(vals))
                witness = Witness(f"a[{i}] lower", (float(t), float(us[k])),
                                  float(vals[k]), amp.a_lo)
                break
            if np.any(vals > amp.a_hi * (1 + _REL_TOL) + _ABS_TOL):
                k = int(np.argmax(vals))
                witness = Witness(f"a[{i}] upper", (float(t), float(us[k])),
                                  float(vals[k]), amp.a_hi)
                break
            # central difference in t, step 1e-5, tolerance 1e-6
            dt = 1e-5
            da = (_vec(lambda u: a_fn(t + dt, u), us)
                  - _vec(lambda u: a_fn(max(t - dt, 0.0), u), us)) / (
                      dt + min(t, dt))
            lhs = float(A_fn(t)) * vals ** 2
            if np.any(lhs > da + 1e-6):
                k = int(np.argmax(lhs - da))
                witness = Witness(f"A[{i}]a^2 <= da/dt", (float(t), float(us[k])),
                                  float(lhs[k]), float(da[k]))
                break
        report.record("H2", witness)

    # H3: divided differences of b(t, .) at or above beta(t)
    for i, sig in enumerate(spec.self_signal, start=1):
        b_fn = compile_expr(sig.b, ("t", "u"))
        beta_fn = compile_expr(sig.beta, ("t",))
        witness = None
        for t in t_sub:
            beta_t = float(beta_fn(t))
            vals = _vec(lambda u: b_fn(t, u), us)
            slopes = np.diff(vals) / np.diff(us)
            if np.any(slopes < beta_t - 1e-9):
                k = int(np.argmin(slopes))
                witness = Witness(f"b[{i}] slope", (float(t), float(us[k]), float(us[k + 1])),
                                  float(slopes[k]), beta_t)
                break
        report.record("H3", witness)

    # H4: delays nonnegative and t - tau(t) eventually growing
    growth_c = 10.0
    for k, term in enumerate(spec.couplings_c, start=1):
        for name, dspec in ((f"tau[{k}]", term.tau), (f"tau_tilde[{k}]", term.tau_tilde)):
            fn = compile_expr(dspec.tau, ("t",))
            vals = _vec(fn, ts)
            witness = None
            if np.any(vals < -_ABS_TOL):
                j = int(np.argmin(vals))
                witness = Witness(f"{name} >= 0", (float(ts[j]),), float(vals[j]), 0.0)
            elif not dspec.declared_unbounded_growth:
                witness = Witness(f"{name} growth declaration", (), 0.0, 1.0)
            else:
                lag = ts - vals
                late = ts > 0.5 * w.t_max
                bad = late & (lag < ts / 2.0 - growth_c)
                if np.any(bad):
                    j = int(np.argmax(bad))
                    witness = Witness(f"{name}: t - tau(t) growth", (float(ts[j]),),
                                      float(lag[j]), float(ts[j] / 2.0 - growth_c))
            report.record("H4", witness)
    if spec.couplings_c:
        report.caveats.append(
            "H4 (t - tau -> inf) is not falsifiable by finite sampling; the verdict "
            "tests the necessary condition t - tau(t) >= t/2 - 10 on the window."
        )

    # H5: Lipschitz declarations of h and f
    for k, term in enumerate(spec.couplings_c, start=1):
        h_fn = compile_expr(term.h, ("u1", "u2"))
        report.record("H5", _check_lipschitz_pair(
            f"h[{k}]", h_fn, (term.gamma1, term.gamma2), us, cross, rng))
    for k, term in enumerate(spec.couplings_d, start=1):
        f_fn = compile_expr(term.f, ("u1", "u2"))
        report.record("H5", _check_lipschitz_pair(
            f"f[{k}]", f_fn, (term.mu1, term.mu2), us, cross, rng))
    if not spec.couplings_c and not spec.couplings_d:
        report.verdicts.setdefault("H5", "not-applicable")

    # H6: Lipschitz declarations of g, g_tilde, and F
    for k, term in enumerate(spec.couplings_d, start=1):
        report.record("H6", _check_lipschitz_one(
            f"g[{k}]", compile_expr(term.g, ("u",)), term.xi, us))
        report.record("H6", _check_lipschitz_one(
            f"g_tilde[{k}]", compile_expr(term.g_tilde, ("u",)), term.xi_tilde, us))
    for i, out in enumerate(spec.outer, start=1):
        F_fn = compile_expr(out.F, ("u1", "u2"))
        report.record("H6", _check_lipschitz_pair(
            f"F[{i}]", F_fn, (out.zeta, out.sigma), us, cross, rng))

    # H7: existence of a positive weight vector
    try:
        d, radius = find_weights(spec, t_max=max(w.t_max, 100.0))
        report.record("H7", None)
        report.caveats.append(
            f"H7 weights d = {np.array2string(d, precision=6)} "
            f"(spectral radius {radius:.6g})"
        )
    except InfeasibleWeightsError as exc:
        report.record("H7", Witness("weight feasibility", (), exc.radius, 1.0))
    return report


# ---------------------------------------------------------------------------
# The stability criterion

class _CriterionFns:
    def __init__(self, spec: ModelSpec):
        self.spec = spec
        self.beta = [compile_expr(s.beta, ("t",)) for s in spec.self_signal]
        self.A = [compile_expr(s.A, ("t",)) for s in spec.amplification]
        self.c = [compile_expr(term.c, ("t",)) for term in spec.couplings_c]
        self.d = [compile_expr(term.d, ("t",)) for term in spec.couplings_d]


@lru_cache(maxsize=64)
def _criterion_fns(spec: ModelSpec) -> _CriterionFns:
    return _CriterionFns(spec)


def h7_values_on_grid(spec: ModelSpec, d, ts: np.ndarray) -> np.ndarray:
    """Criterion bracket per neuron on a whole time grid; shape (len(ts), n)."""
    d = np.asarray(d, dtype=float)
    if d.shape != (spec.n,) or np.any(d <= 0):
        raise ValueError(f"need a positive weight vector of length {spec.n}")
    fns = _criterion_fns(spec)
    ts = np.asarray(ts, dtype=float)
    out = np.empty((len(ts), spec.n))
    a_lo = np.array([amp.a_lo for amp in spec.amplification])
    a_hi = np.array([amp.a_hi for amp in spec.amplification])
    for i in range(spec.n):
        out[:, i] = -a_lo[i] * (_vec(fns.beta[i], ts) + _vec(fns.A[i], ts))
    for k, term in enumerate(spec.couplings_c):
        i, j, l = term.i, term.j, term.l
        zeta = spec.outer[i].zeta
        coeff = a_hi[j] * (d[j] / d[i]) * term.gamma1 + a_hi[l] * (d[l] / d[i]) * term.gamma2
        out[:, i] += zeta * np.abs(_vec(fns.c[k], ts)) * coeff
    for k, term in enumerate(spec.couplings_d):
        i, j, l = term.i, term.j, term.l
        sigma = spec.outer[i].sigma
        coeff = (a_hi[j] * (d[j] / d[i]) * term.xi * term.mu1
                 + a_hi[l] * (d[l] / d[i]) * term.xi_tilde * term.mu2)
        out[:, i] += sigma * np.abs(_vec(fns.d[k], ts)) * coeff
    return out


def h7_value(spec: ModelSpec, d, t: float) -> np.ndarray:
    """Criterion bracket per neuron at a single time."""
    return h7_values_on_grid(spec, d, np.array([float(t)]))[0]


@dataclass
class CriterionCurve:
    grid: np.ndarray
    values: np.ndarray  # shape (len(grid), n)
    d: np.ndarray
    tail_fraction: float
    limsup_estimate: np.ndarray  # per neuron

    @property
    def negative(self) -> bool:
        return bool(np.all(self.limsup_estimate < 0.0))

    def to_csv(self) -> str:
        n = self.values.shape[1]
        lines = ["t," + ",".join(f"value_{i + 1}" for i in range(n))]
        for t, row in zip(self.grid, self.values):
            lines.append(",".join([repr(float(t))] + [repr(float(v)) for v in row]))
        return "\n".join(lines) + "\n"

    def render(self) -> str:
        per = ", ".join(f"{v:.6g}" for v in self.limsup_estimate)
        verdict = "negative" if self.negative else "NOT negative"
        return (f"criterion limsup estimates per neuron: [{per}] "
                f"(tail fraction {self.tail_fraction:g} of grid up to "
                f"t={self.grid[-1]:g}) -> {verdict}\n")


def h7_limsup(spec: ModelSpec, d, t_max: float = 200.0, grid_step: float = 0.05,
              tail_fraction: float = 0.5) -> CriterionCurve:
    """Estimate the limsup of the criterion bracket as a tail max on a grid."""
    if not 0.0 < tail_fraction <= 1.0:
        raise ValueError("tail_fraction must lie in (0, 1]")
    ts = np.arange(0.0, t_max + grid_step / 2, grid_step)
    values = h7_values_on_grid(spec, d, ts)
    tail_start = int(math.floor(len(ts) * (1.0 - tail_fraction)))
    estimate = values[tail_start:].max(axis=0)
    return CriterionCurve(grid=ts, values=values, d=np.asarray(d, dtype=float),
                          tail_fraction=tail_fraction, limsup_estimate=estimate)


class InfeasibleWeightsError(ValueError):
    def __init__(self, radius: float):
        super().__init__(
            f"no positive weight vector exists: spectral radius {radius:.6g} >= 1"
        )
        self.radius = radius


def coupling_matrix(spec: ModelSpec, t_max: float = 200.0, grid_step: float = 0.05,
                    tail_fraction: float = 0.5) -> tuple[np.ndarray, np.ndarray]:
    """Tail-aggregated decay floor beta_floor_i and coupling matrix K_ij, the
    constant-coefficient envelope of the criterion: feasibility of
    beta_floor_i d_i - sum_j K_ij d_j > 0 implies a negative criterion verdict
    on the same grid."""
    fns = _criterion_fns(spec)
    ts = np.arange(0.0, t_max + grid_step / 2, grid_step)
    tail = ts[int(math.floor(len(ts) * (1.0 - tail_fraction))):]
    a_lo = np.array([amp.a_lo for amp in spec.amplification])
    a_hi = np.array([amp.a_hi for amp in spec.amplification])
    beta_floor = np.array([
        a_lo[i] * np.min(_vec(fns.beta[i], tail) + _vec(fns.A[i], tail))
        for i in range(spec.n)
    ])
    K = np.zeros((spec.n, spec.n))
    for k, term in enumerate(spec.couplings_c):
        mag = np.abs(_vec(fns.c[k], tail))
        zeta = spec.outer[term.i].zeta
        K[term.i, term.j] += float(np.max(zeta * mag)) * a_hi[term.j] * term.gamma1
        K[term.i, term.l] += float(np.max(zeta * mag)) * a_hi[term.l] * term.gamma2
    for k, term in enumerate(spec.couplings_d):
        mag = np.abs(_vec(fns.d[k], tail))
        sigma = spec.outer[term.i].sigma
        K[term.i, term.j] += float(np.max(sigma * mag)) * a_hi[term.j] * term.xi * term.mu1
        K[term.i, term.l] += float(np.max(sigma * mag)) * a_hi[term.l] * term.xi_tilde * term.mu2
    return beta_floor, K


def find_weights(spec: ModelSpec, t_max: float = 200.0, grid_step: float = 0.05,
                 tail_fraction: float = 0.5, margin: float = 1e-6):
    """Positive weights realizing the criterion, via Perron theory.

    Returns (d, spectral_radius) with d normalized to max 1; raises
    InfeasibleWeightsError when the spectral radius of diag(beta_floor)^-1 K
    reaches 1 (equivalently, the M-matrix condition fails).
    """
    beta_floor, K = coupling_matrix(spec, t_max, grid_step, tail_fraction)
    if np.any(beta_floor <= 0.0):
        raise InfeasibleWeightsError(math.inf)
    D = K / beta_floor[:, None]
    radius, vec = _perron(D)
    if radius >= 1.0 - 1e-9:
        raise InfeasibleWeightsError(radius)
    d = vec / np.max(vec)
    if np.any(d <= 0) or np.min(beta_floor * d - K @ d - margin * d) < -_ABS_TOL:
        # reducible couplings can starve the Perron vector; the Neumann series
        # d = sum_k D^k 1 is strictly positive whenever the radius is below 1
        d = np.ones(spec.n)
        for _ in range(10000):
            nxt = 1.0 + D @ d
            if np.max(np.abs(nxt - d)) <= 1e-14 * np.max(np.abs(nxt)):
                d = nxt
                break
            d = nxt
        d = d / np.max(d)
        if np.min(beta_floor * d - K @ d - margin * d) < -_ABS_TOL:
            raise InfeasibleWeightsError(radius)
    return d, radius


def _perron(D: np.ndarray) -> tuple[float, np.ndarray]:
    """Spectral radius and nonnegative eigenvector by power iteration.

    Iterates on D + I + eps: the identity shift keeps the Perron vector,
    moves the Perron root to 1 + rho(D), and makes the iteration aperiodic
    (plain power iteration cycles on bipartite coupling graphs); the eps
    jitter breaks reducibility at a radius cost below n * 1e-14."""
    n = D.shape[0]
    M = D + np.eye(n) + 1e-14
    v = np.ones(n) / n
    nrm = 1.0
    for _ in range(5000):
        w = M @ v
        nrm = float(np.max(w))
        w /= nrm
        if np.max(np.abs(w - v)) < 1e-15:
            v = w
            break
        v = w
    return nrm - 1.0, v


# ---------------------------------------------------------------------------
# Asymptotic-pair gap curves

DEFAULT_PROBES = (("w=0", "0"), ("w=1", "1"), ("w=sin", "sin(t)"))


@dataclass
class GapCurve:
    grid: np.ndarray
    curves: dict[str, np.ndarray]
    verdicts: dict[str, bool]

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    def to_csv(self) -> str:
        names = list(self.curves)
        lines = ["t," + ",".join(names)]
        for k, t in enumerate(self.grid):
            lines.append(",".join([repr(float(t))]
                                  + [repr(float(self.curves[nm][k])) for nm in names]))
        return "\n".join(lines) + "\n"

    def render(self) -> str:
        lines = []
        for name, ok in self.verdicts.items():
            tail = float(np.max(np.abs(self.curves[name][-max(1, len(self.grid) // 5):])))
            lines.append(f"gap {name}: tail max {tail:.3g} -> {'pass' if ok else 'FAIL'}")
        return "\n".join(lines) + "\n"


def _decays(values: np.ndarray) -> bool:
    m = max(1, len(values) // 5)
    head = float(np.max(np.abs(values[:m])))
    tail = float(np.max(np.abs(values[-m:])))
    return tail <= 1e-6 or tail <= 100.0 * np.finfo(float).eps * head


def asymptotic_gap(pair: AsymptoticPair, probes=None, grid: np.ndarray | None = None) -> GapCurve:
    """Difference curves for every quantity Definition-style pairs may vary in,
    evaluated against bounded probe functions where a state argument is needed."""
    base, partner = pair.base, pair.partner
    ts = np.arange(0.0, 50.0 + 1e-9, 0.1) if grid is None else np.asarray(grid, float)
    if probes is None:
        probes = [(name, compile_expr(parse_expr(text, ("t",)), ("t",)))
                  for name, text in DEFAULT_PROBES]
    curves: dict[str, np.ndarray] = {}

    for i in range(base.n):
        b0 = compile_expr(base.self_signal[i].b, ("t", "u"))
        b1 = compile_expr(partner.self_signal[i].b, ("t", "u"))
        beta0 = compile_expr(base.self_signal[i].beta, ("t",))
        beta1 = compile_expr(partner.self_signal[i].beta, ("t",))
        curves[f"beta_{i + 1}"] = _vec(beta0, ts) - _vec(beta1, ts)
        for probe_name, w_fn in probes:
            wt = _vec(w_fn, ts)
            va = np.asarray(b0(ts, wt), dtype=float) + np.zeros_like(ts)
            vb = np.asarray(b1(ts, wt), dtype=float) + np.zeros_like(ts)
            curves[f"b_{i + 1}[{probe_name}]"] = va - vb
        I0 = compile_expr(base.inputs[i], ("t",))
        I1 = compile_expr(partner.inputs[i], ("t",))
        curves[f"I_{i + 1}"] = _vec(I0, ts) - _vec(I1, ts)

    key = lambda term: (term.i + 1, term.j + 1, term.l + 1, term.p + 1)
    partner_c = {key(t): t for t in partner.couplings_c}
    for term in base.couplings_c:
        other = partner_c[key(term)]
        kk = "".join(str(x) for x in key(term))
        curves[f"c_{kk}"] = (_vec(compile_expr(term.c, ("t",)), ts)
                             - _vec(compile_expr(other.c, ("t",)), ts))
        curves[f"tau_{kk}"] = (_vec(compile_expr(term.tau.tau, ("t",)), ts)
                               - _vec(compile_expr(other.tau.tau, ("t",)), ts))
        curves[f"tau_tilde_{kk}"] = (_vec(compile_expr(term.tau_tilde.tau, ("t",)), ts)
                                     - _vec(compile_expr(other.tau_tilde.tau, ("t",)), ts))
    partner_d = {key(t): t for t in partner.couplings_d}
    for term in base.couplings_d:
        other = partner_d[key(term)]
        kk = "".join(str(x) for x in key(term))
        curves[f"d_{kk}"] = (_vec(compile_expr(term.d, ("t",)), ts)
                             - _vec(compile_expr(other.d, ("t",)), ts))

    verdicts = {name: _decays(vals) for name, vals in curves.items()}
    return GapCurve(grid=ts, curves=curves, verdicts=verdicts)


# ---------------------------------------------------------------------------
# Trajectory pair convergence

@dataclass
class ConvergenceCurve:
    grid: np.ndarray  # window start times
    values: np.ndarray  # sup over [t, t+window] of max_i |xA - xB|
    window: float

    @property
    def final(self) -> float:
        return float(self.values[-1])

    def converged(self, tol: float = 1e-2) -> bool:
        return self.final <= tol

    def to_csv(self) -> str:
        lines = ["t,gap"]
        for t, v in zip(self.grid, self.values):
            lines.append(f"{t!r},{v!r}")
        return "\n".join(lines) + "\n"


def pair_convergence(traj_a, traj_b, window_width: float,
                     dt: float = 0.01) -> ConvergenceCurve:
    """Sliding-window sup of the componentwise gap between two trajectories."""
    lo = max(traj_a.t0, traj_b.t0)
    hi = min(traj_a.t_end, traj_b.t_end)
    if hi - lo < 3.0 * window_width:
        raise ValueError(
            f"trajectories share [{lo}, {hi}], need at least 3 windows of {window_width}"
        )
    ts = np.minimum(np.arange(lo, hi + dt / 2, dt), hi)
    gap = np.max(np.abs(traj_a.sample_many(ts) - traj_b.sample_many(ts)), axis=1)
    starts = np.arange(lo, hi - window_width + 1e-12, window_width / 8.0)
    values = np.empty(len(starts))
    for k, t in enumerate(starts):
        a = int(np.searchsorted(ts, t - 1e-12))
        b = int(np.searchsorted(ts, t + window_width + 1e-12, "right"))
        values[k] = float(np.max(gap[a:b]))
    return ConvergenceCurve(grid=starts, values=values, window=window_width)
