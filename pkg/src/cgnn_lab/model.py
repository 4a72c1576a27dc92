"""Validated domain types for the network model and its delay structure.

A ModelSpec carries every symbol of the coupled system

    x_i'(t) = a_i(t, x_i) [ -b_i(t, x_i) + F_i(U_i, V_i) + I_i(t) ]

where U_i sums direct couplings through discrete time-varying delays and V_i
sums couplings through distributed-delay Stieltjes integrals.  Kernel measures
are non-decreasing with unit total mass on (-inf, 0]; they come in closed-form
families (exponential, gamma, point atoms), finite-support user densities, and
mixtures of those.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaincc, gammaln

from .exprlang import (
    Expr,
    Const,
    compile_expr,
    eval_expr,
    free_vars,
    parse_expr,
    print_expr,
)

__all__ = [
    "ModelError",
    "KernelMeasure",
    "ExponentialKernel",
    "GammaKernel",
    "AtomKernel",
    "DensityKernel",
    "MixtureKernel",
    "kernel_from_document",
    "kernel_to_document",
    "kernel_mass",
    "kernel_tail_cutoff",
    "DelaySpec",
    "delay_eval",
    "AmplificationSpec",
    "SelfSignalSpec",
    "OuterSpec",
    "CouplingC",
    "CouplingD",
    "InitialCondition",
    "ModelSpec",
    "AsymptoticPair",
    "build_model",
    "build_initials",
]

MASS_TOL = 1e-9  # unit-mass acceptance for numerically integrated densities

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


class ModelError(ValueError):
    """Schema violation, kernel normalization failure, bad declared constant."""


# ---------------------------------------------------------------------------
# Kernel measures on (-inf, 0]
#
# mass_below(s) is the measure of (-inf, s]; tail_mass(T) the measure of the
# open set (-inf, -T), so an atom sitting exactly at -T counts as covered.

class KernelMeasure:
    def mass_below(self, s: float) -> float:
        raise NotImplementedError

    def tail_mass(self, T: float) -> float:
        raise NotImplementedError

    def quad_nodes(self, T: float) -> tuple[np.ndarray, np.ndarray]:
        """Nodes s_k in [-T, 0] and weights approximating integration dη."""
        raise NotImplementedError

    def tail_cutoff(self, eps: float) -> float:
        """Smallest horizon T >= 0 with tail_mass(T) <= eps."""
        if not 0.0 < eps < 1.0:
            raise ModelError(f"tail budget must be in (0,1), got {eps}")
        if self.tail_mass(0.0) <= eps:
            return 0.0
        hi = 1.0
        while self.tail_mass(hi) > eps:
            hi *= 2.0
            if hi > 1e9:
                raise ModelError("kernel tail does not decay below budget")
        lo = hi / 2.0
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            if self.tail_mass(mid) > eps:
                lo = mid
            else:
                hi = mid
        return hi

    def has_exponential_moment(self) -> bool:
        """Whether some exp(mu*u) moment is finite (true for all built-in
        families; recorded for the low-order model's kernel condition)."""
        return True


def _density_panels(T: float) -> list[tuple[float, float]]:
    """Split [0, T] into panels of length <= 1 for Gauss-Legendre quadrature."""
    if T <= 0.0:
        return []
    count = max(1, math.ceil(T - 1e-12))
    edges = np.linspace(0.0, T, count + 1)
    return list(zip(edges[:-1], edges[1:]))


def _panel_quad(pdf, T: float) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = [], []
    for a, b in _density_panels(T):
        half = 0.5 * (b - a)
        u = 0.5 * (a + b) + half * _GL_NODES
        nodes.append(u)
        weights.append(half * _GL_WEIGHTS * pdf(u))
    if not nodes:
        return np.empty(0), np.empty(0)
    return np.concatenate(nodes), np.concatenate(weights)


@dataclass(frozen=True)
class ExponentialKernel(KernelMeasure):
    rate: float

    def __post_init__(self):
        if self.rate <= 0:
            raise ModelError(f"exponential kernel needs rate > 0, got {self.rate}")

    def mass_below(self, s):
        if s == -math.inf:
            return 0.0
        return math.exp(self.rate * min(s, 0.0))  # survival of K at -s

    def tail_mass(self, T):
        return math.exp(-self.rate * T)

    def quad_nodes(self, T):
        u, w = _panel_quad(lambda u: self.rate * np.exp(-self.rate * u), T)
        return -u, w

    def tail_cutoff(self, eps):
        if not 0.0 < eps < 1.0:
            raise ModelError(f"tail budget must be in (0,1), got {eps}")
        return math.log(1.0 / eps) / self.rate


@dataclass(frozen=True)
class GammaKernel(KernelMeasure):
    shape: float
    rate: float

    def __post_init__(self):
        if self.shape < 1 or self.rate <= 0:
            raise ModelError(
                f"gamma kernel needs shape >= 1 and rate > 0, got "
                f"({self.shape}, {self.rate})"
            )

    def _pdf(self, u):
        k, lam = self.shape, self.rate
        return np.exp(
            k * math.log(lam) + (k - 1.0) * np.log(u) - lam * u - gammaln(k)
        )

    def mass_below(self, s):
        if s == -math.inf:
            return 0.0
        return float(gammaincc(self.shape, self.rate * max(-s, 0.0)))

    def tail_mass(self, T):
        return float(gammaincc(self.shape, self.rate * T))

    def quad_nodes(self, T):
        u, w = _panel_quad(self._pdf, T)
        return -u, w


@dataclass(frozen=True)
class AtomKernel(KernelMeasure):
    location: float
    mass: float = 1.0

    def __post_init__(self):
        if self.location < 0:
            raise ModelError(f"atom location must be >= 0, got {self.location}")
        if self.mass <= 0:
            raise ModelError(f"atom mass must be > 0, got {self.mass}")

    def mass_below(self, s):
        return self.mass if -self.location <= s else 0.0

    def tail_mass(self, T):
        return self.mass if self.location > T else 0.0

    def quad_nodes(self, T):
        if self.location <= T:
            return np.array([-self.location]), np.array([self.mass])
        return np.empty(0), np.empty(0)

    def tail_cutoff(self, eps):
        if not 0.0 < eps < 1.0:
            raise ModelError(f"tail budget must be in (0,1), got {eps}")
        return self.location if self.mass > eps else 0.0


@dataclass(frozen=True)
class DensityKernel(KernelMeasure):
    """User density K(u) on a declared finite support [0, S]."""

    expr: Expr
    support: float

    def __post_init__(self):
        if self.support <= 0:
            raise ModelError(f"density support must be > 0, got {self.support}")
        extra = free_vars(self.expr) - {"u"}
        if extra:
            raise ModelError(f"density expression may only use 'u', found {sorted(extra)}")

    def _pdf(self):
        return compile_expr(self.expr, ("u",))

    def _integral(self, a: float, b: float) -> float:
        if b <= a:
            return 0.0
        pdf = self._pdf()
        vals = 0.0
        for lo, hi in _density_panels(b - a):
            half = 0.5 * (hi - lo)
            u = a + 0.5 * (lo + hi) + half * _GL_NODES
            vals += half * float(np.dot(_GL_WEIGHTS, pdf(u)))
        return vals

    def mass_below(self, s):
        if s == -math.inf:
            return 0.0
        return self._integral(min(-s, self.support), self.support)

    def tail_mass(self, T):
        return self._integral(min(T, self.support), self.support)

    def quad_nodes(self, T):
        u, w = _panel_quad(self._pdf(), min(T, self.support))
        return -u, w


@dataclass(frozen=True)
class MixtureKernel(KernelMeasure):
    components: tuple[tuple[float, KernelMeasure], ...]

    def __post_init__(self):
        if not self.components:
            raise ModelError("mixture needs at least one component")
        weights = [w for w, _ in self.components]
        if any(w <= 0 for w in weights):
            raise ModelError(f"mixture weights must be positive, got {weights}")
        if abs(sum(weights) - 1.0) > 1e-12:
            raise ModelError(f"mixture weights must sum to 1, got {sum(weights)}")

    def mass_below(self, s):
        return sum(w * k.mass_below(s) for w, k in self.components)

    def tail_mass(self, T):
        return sum(w * k.tail_mass(T) for w, k in self.components)

    def quad_nodes(self, T):
        nodes = [k.quad_nodes(T) for _, k in self.components]
        s = np.concatenate([n for n, _ in nodes])
        w = np.concatenate([w_i * wk for (_, wk), (w_i, _) in zip(nodes, self.components)])
        return s, w

    def tail_cutoff(self, eps):
        if all(isinstance(k, AtomKernel) for _, k in self.components):
            # exact: drop the deepest atoms while their mass fits the budget
            atoms = sorted(
                ((k.location, w * k.mass) for w, k in self.components), reverse=True
            )
            dropped = 0.0
            for loc, mass in atoms:
                if dropped + mass > eps:
                    return loc
                dropped += mass
            return 0.0
        return super().tail_cutoff(eps)


def _check_unit_mass(kernel: KernelMeasure, where: str) -> KernelMeasure:
    total = kernel.mass_below(0.0)
    if abs(total - 1.0) > MASS_TOL:
        raise ModelError(f"{where}: kernel mass {total:.6g} != 1")
    if isinstance(kernel, DensityKernel):
        pdf = kernel._pdf()
        u = np.linspace(0.0, kernel.support, 401)
        vals = np.asarray(pdf(u), dtype=float)
        if np.any(vals < -1e-12):
            bad = u[np.argmin(vals)]
            raise ModelError(f"{where}: density negative at u={bad:.6g}")
    return kernel


def kernel_from_document(doc: dict, where: str = "kernel") -> KernelMeasure:
    try:
        family = doc["family"]
    except (TypeError, KeyError):
        raise ModelError(f"{where}: kernel table needs a 'family' key") from None
    try:
        if family == "exponential":
            k = ExponentialKernel(rate=float(doc["rate"]))
        elif family == "gamma":
            k = GammaKernel(shape=float(doc["shape"]), rate=float(doc["rate"]))
        elif family == "atom":
            k = AtomKernel(location=float(doc["location"]), mass=float(doc.get("mass", 1.0)))
        elif family == "density":
            expr = parse_expr(str(doc["expr"]), ("u",))
            k = DensityKernel(expr=expr, support=float(doc["support"]))
        elif family == "mixture":
            parts = tuple(
                (float(c["weight"]), kernel_from_document(c, where))
                for c in doc["components"]
            )
            k = MixtureKernel(components=parts)
        else:
            raise ModelError(f"{where}: unknown kernel family {family!r}")
    except KeyError as exc:
        raise ModelError(f"{where}: kernel family {family!r} missing field {exc}") from None
    return _check_unit_mass(k, where)


def kernel_to_document(k: KernelMeasure) -> dict:
    if isinstance(k, ExponentialKernel):
        return {"family": "exponential", "rate": k.rate}
    if isinstance(k, GammaKernel):
        return {"family": "gamma", "shape": k.shape, "rate": k.rate}
    if isinstance(k, AtomKernel):
        return {"family": "atom", "location": k.location, "mass": k.mass}
    if isinstance(k, DensityKernel):
        return {"family": "density", "expr": print_expr(k.expr), "support": k.support}
    if isinstance(k, MixtureKernel):
        return {
            "family": "mixture",
            "components": [
                {"weight": w, **kernel_to_document(c)} for w, c in k.components
            ],
        }
    raise TypeError(f"unknown kernel type {type(k)}")


def kernel_mass(k: KernelMeasure, s_lo: float, s_hi: float) -> float:
    """Measure of the window (s_lo, s_hi], both endpoints <= 0."""
    if s_hi > 0 or s_lo > s_hi:
        raise ModelError(f"bad kernel window [{s_lo}, {s_hi}]")
    return k.mass_below(s_hi) - k.mass_below(s_lo)


def kernel_tail_cutoff(k: KernelMeasure, eps: float) -> float:
    return k.tail_cutoff(eps)


# ---------------------------------------------------------------------------
# Per-neuron and per-coupling declarations

@dataclass(frozen=True)
class DelaySpec:
    tau: Expr  # in t, must stay >= 0
    declared_unbounded_growth: bool = True  # claim that t - tau(t) -> +inf


def delay_eval(d: DelaySpec, t: float) -> float:
    if t < 0:
        raise ModelError(f"delays are defined for t >= 0, got t={t}")
    val = eval_expr(d.tau, {"t": t})
    if val < 0:
        raise ModelError(
            f"delay {print_expr(d.tau)} negative at t={t}: {val}; spec invalidated"
        )
    return val


@dataclass(frozen=True)
class AmplificationSpec:
    a: Expr  # in (t, u), positive
    a_lo: float
    a_hi: float
    A: Expr = field(default_factory=lambda: Const(0.0))  # in t


@dataclass(frozen=True)
class SelfSignalSpec:
    b: Expr  # in (t, u)
    beta: Expr  # in t, declared lower slope of u -> b(t, u)
    beta_star: Expr | None = None  # optional upper slope, periodic checks only


@dataclass(frozen=True)
class OuterSpec:
    F: Expr  # in (u1, u2)
    zeta: float  # Lipschitz constant in the first slot
    sigma: float  # Lipschitz constant in the second slot


@dataclass(frozen=True)
class CouplingC:
    """Direct coupling c(t) * h(x_j(t - tau(t)), x_l(t - tau_tilde(t)))."""

    i: int
    j: int
    l: int
    p: int
    c: Expr  # in t
    h: Expr  # in (u1, u2)
    gamma1: float
    gamma2: float
    tau: DelaySpec
    tau_tilde: DelaySpec


@dataclass(frozen=True)
class CouplingD:
    """Distributed coupling d(t) * f(int g(x_j) dK, int g_tilde(x_l) dK_tilde)."""

    i: int
    j: int
    l: int
    p: int
    d: Expr  # in t
    f: Expr  # in (u1, u2)
    mu1: float
    mu2: float
    g: Expr  # in u
    g_tilde: Expr  # in u
    xi: float
    xi_tilde: float
    kernel: KernelMeasure
    kernel_tilde: KernelMeasure


@dataclass(frozen=True)
class InitialCondition:
    phi: tuple[Expr, ...]  # per component, in s (s <= 0)
    bound: float


@dataclass(frozen=True)
class ModelSpec:
    n: int
    P: int
    amplification: tuple[AmplificationSpec, ...]
    self_signal: tuple[SelfSignalSpec, ...]
    outer: tuple[OuterSpec, ...]
    inputs: tuple[Expr, ...]
    couplings_c: tuple[CouplingC, ...] = ()
    couplings_d: tuple[CouplingD, ...] = ()

    def max_kernel_cutoff(self, eps: float) -> float:
        cuts = [term.kernel.tail_cutoff(eps) for term in self.couplings_d]
        cuts += [term.kernel_tilde.tail_cutoff(eps) for term in self.couplings_d]
        return max(cuts, default=0.0)


@dataclass(frozen=True)
class AsymptoticPair:
    """A base system and a partner sharing everything Definition-style except
    the self-signal, coupling coefficients, delays, and inputs."""

    base: ModelSpec
    partner: ModelSpec

    def __post_init__(self):
        validate_pair_structure(self.base, self.partner)


def validate_pair_structure(base: ModelSpec, partner: ModelSpec) -> None:
    if base.n != partner.n or base.P != partner.P:
        raise ModelError("asymptotic pair must share dimensions (n, P)")
    if base.amplification != partner.amplification:
        raise ModelError("asymptotic pair must share amplification functions")
    if base.outer != partner.outer:
        raise ModelError("asymptotic pair must share outer functions F_i")
    key = lambda t: (t.i, t.j, t.l, t.p)
    for name, a_terms, b_terms in (
        ("c", base.couplings_c, partner.couplings_c),
        ("d", base.couplings_d, partner.couplings_d),
    ):
        a_map = {key(t): t for t in a_terms}
        b_map = {key(t): t for t in b_terms}
        if a_map.keys() != b_map.keys():
            raise ModelError(f"asymptotic pair must share the {name}-coupling index set")
        for k, ta in a_map.items():
            tb = b_map[k]
            if name == "c":
                same = ta.h == tb.h and ta.gamma1 == tb.gamma1 and ta.gamma2 == tb.gamma2
            else:
                same = (
                    ta.f == tb.f
                    and ta.g == tb.g
                    and ta.g_tilde == tb.g_tilde
                    and (ta.mu1, ta.mu2, ta.xi, ta.xi_tilde)
                    == (tb.mu1, tb.mu2, tb.xi, tb.xi_tilde)
                    and ta.kernel == tb.kernel
                    and ta.kernel_tilde == tb.kernel_tilde
                )
            if not same:
                raise ModelError(
                    f"asymptotic pair differs in shared structure of {name}-term {k}"
                )


# ---------------------------------------------------------------------------
# Document -> ModelSpec

def _parse_field(section: str, table: dict, key: str, params: tuple[str, ...],
                 default: str | None = None) -> Expr:
    text = table.get(key, default)
    if text is None:
        raise ModelError(f"{section}: missing required field {key!r}")
    try:
        e = parse_expr(str(text), params)
    except ValueError as exc:
        raise ModelError(f"{section}.{key}: {exc}") from None
    return e


def _positive(section: str, table: dict, key: str) -> float:
    try:
        val = float(table[key])
    except KeyError:
        raise ModelError(f"{section}: missing required field {key!r}") from None
    if val <= 0 or not math.isfinite(val):
        raise ModelError(f"{section}.{key}: declared constant must be positive, got {val}")
    return val


def _index(section: str, table: dict, key: str, upper: int) -> int:
    try:
        val = int(table[key])
    except KeyError:
        raise ModelError(f"{section}: missing index {key!r}") from None
    if not 1 <= val <= upper:
        raise ModelError(f"{section}.{key}: index {val} outside [1, {upper}]")
    return val - 1


def _per_neuron(document: dict, section: str, n: int) -> list[dict]:
    table = document.get(section)
    if not isinstance(table, dict):
        raise ModelError(f"missing section {section!r}")
    out = []
    for i in range(1, n + 1):
        sub = table.get(str(i), table.get(i))
        if not isinstance(sub, dict):
            raise ModelError(f"{section}: missing entry for neuron {i}")
        out.append(sub)
    return out


_T_GRID = np.linspace(0.0, 20.0, 201)


def build_model(document: dict) -> ModelSpec:
    """Validate a parsed config document into a ModelSpec.

    Structural problems (schema, kernel normalization, non-positive declared
    constants, negative delays/slopes on a coarse grid) fail here; the
    hypothesis-level function checks live in the criteria module so that a
    deliberately wrong declaration can still be built and then falsified.
    """
    dims = document.get("dimensions")
    if not isinstance(dims, dict) or "n" not in dims or "P" not in dims:
        raise ModelError("missing section 'dimensions' with fields n, P")
    n, P = int(dims["n"]), int(dims["P"])
    if n < 1 or P < 1:
        raise ModelError(f"dimensions must satisfy n >= 1, P >= 1, got n={n}, P={P}")

    amplification = []
    for i, tab in enumerate(_per_neuron(document, "amplification", n), start=1):
        sec = f"amplification[{i}]"
        a = _parse_field(sec, tab, "expr", ("t", "u"))
        a_lo = _positive(sec, tab, "a_lo")
        a_hi = _positive(sec, tab, "a_hi")
        if a_hi < a_lo:
            raise ModelError(f"{sec}: a_hi {a_hi} < a_lo {a_lo}")
        A = _parse_field(sec, tab, "A_expr", ("t",), default="0")
        if "t" not in free_vars(a) and A != Const(0.0):
            raise ModelError(f"{sec}: autonomous amplification requires A_expr = 0")
        amplification.append(AmplificationSpec(a=a, a_lo=a_lo, a_hi=a_hi, A=A))

    self_signal = []
    for i, tab in enumerate(_per_neuron(document, "selfsignal", n), start=1):
        sec = f"selfsignal[{i}]"
        b = _parse_field(sec, tab, "expr", ("t", "u"))
        beta = _parse_field(sec, tab, "beta_expr", ("t",))
        beta_fn = compile_expr(beta, ("t",))
        vals = np.asarray(beta_fn(_T_GRID), dtype=float) + np.zeros_like(_T_GRID)
        if np.any(vals < 0):
            bad = _T_GRID[np.argmin(vals)]
            raise ModelError(f"{sec}: beta_expr negative at t={bad:.4g}")
        beta_star = None
        if "beta_star_expr" in tab:
            beta_star = _parse_field(sec, tab, "beta_star_expr", ("t",))
        self_signal.append(SelfSignalSpec(b=b, beta=beta, beta_star=beta_star))

    outer = []
    for i, tab in enumerate(_per_neuron(document, "outer", n), start=1):
        sec = f"outer[{i}]"
        outer.append(
            OuterSpec(
                F=_parse_field(sec, tab, "F_expr", ("u1", "u2")),
                zeta=_positive(sec, tab, "zeta"),
                sigma=_positive(sec, tab, "sigma"),
            )
        )

    inputs = []
    for i, tab in enumerate(_per_neuron(document, "input", n), start=1):
        inputs.append(_parse_field(f"input[{i}]", tab, "expr", ("t",)))

    def _delay(sec: str, tab: dict, key: str) -> DelaySpec:
        tau = _parse_field(sec, tab, key, ("t",), default="0")
        fn = compile_expr(tau, ("t",))
        vals = np.asarray(fn(_T_GRID), dtype=float) + np.zeros_like(_T_GRID)
        if np.any(vals < 0):
            bad = _T_GRID[np.argmin(vals)]
            raise ModelError(f"{sec}.{key}: delay negative at t={bad:.4g}")
        return DelaySpec(tau=tau)

    couplings_c = []
    seen = set()
    shared_tau: dict[tuple, Expr] = {}
    shared_tau_tilde: dict[tuple, Expr] = {}
    for idx, tab in enumerate(document.get("coupling_c", []), start=1):
        sec = f"coupling_c[{idx}]"
        i = _index(sec, tab, "i", n)
        j = _index(sec, tab, "j", n)
        l = _index(sec, tab, "l", n)
        p = _index(sec, tab, "p", P)
        if (i, j, l, p) in seen:
            raise ModelError(f"{sec}: duplicate index (i,j,l,p)=({i+1},{j+1},{l+1},{p+1})")
        seen.add((i, j, l, p))
        term = CouplingC(
            i=i, j=j, l=l, p=p,
            c=_parse_field(sec, tab, "c_expr", ("t",)),
            h=_parse_field(sec, tab, "h_expr", ("u1", "u2")),
            gamma1=_positive(sec, tab, "gamma1"),
            gamma2=_positive(sec, tab, "gamma2"),
            tau=_delay(sec, tab, "tau_expr"),
            tau_tilde=_delay(sec, tab, "tau_tilde_expr"),
        )
        # delays are indexed (i, j, p) and (i, l, p): no l / j dependence
        for store, key, expr, name in (
            (shared_tau, (i, j, p), term.tau.tau, "tau_expr"),
            (shared_tau_tilde, (i, l, p), term.tau_tilde.tau, "tau_tilde_expr"),
        ):
            if key in store and store[key] != expr:
                raise ModelError(f"{sec}: {name} conflicts with an earlier entry "
                                 f"sharing indices {tuple(x + 1 for x in key)}")
            store[key] = expr
        couplings_c.append(term)

    couplings_d = []
    seen = set()
    shared_g: dict[tuple, tuple] = {}
    shared_g_tilde: dict[tuple, tuple] = {}
    for idx, tab in enumerate(document.get("coupling_d", []), start=1):
        sec = f"coupling_d[{idx}]"
        i = _index(sec, tab, "i", n)
        j = _index(sec, tab, "j", n)
        l = _index(sec, tab, "l", n)
        p = _index(sec, tab, "p", P)
        if (i, j, l, p) in seen:
            raise ModelError(f"{sec}: duplicate index (i,j,l,p)=({i+1},{j+1},{l+1},{p+1})")
        seen.add((i, j, l, p))
        if "kernel" not in tab or "kernel_tilde" not in tab:
            raise ModelError(f"{sec}: needs kernel and kernel_tilde tables")
        term = CouplingD(
            i=i, j=j, l=l, p=p,
            d=_parse_field(sec, tab, "d_expr", ("t",)),
            f=_parse_field(sec, tab, "f_expr", ("u1", "u2")),
            mu1=_positive(sec, tab, "mu1"),
            mu2=_positive(sec, tab, "mu2"),
            g=_parse_field(sec, tab, "g_expr", ("u",)),
            g_tilde=_parse_field(sec, tab, "g_tilde_expr", ("u",)),
            xi=_positive(sec, tab, "xi"),
            xi_tilde=_positive(sec, tab, "xi_tilde"),
            kernel=kernel_from_document(tab["kernel"], f"{sec}.kernel"),
            kernel_tilde=kernel_from_document(tab["kernel_tilde"], f"{sec}.kernel_tilde"),
        )
        # g/xi/kernel carry no l dependence, the tilde versions no j dependence
        for store, key, val, name in (
            (shared_g, (i, j, p), (term.g, term.xi, term.kernel), "g/xi/kernel"),
            (shared_g_tilde, (i, l, p),
             (term.g_tilde, term.xi_tilde, term.kernel_tilde), "g_tilde/xi_tilde/kernel_tilde"),
        ):
            if key in store and store[key] != val:
                raise ModelError(f"{sec}: {name} conflicts with an earlier entry "
                                 f"sharing indices {tuple(x + 1 for x in key)}")
            store[key] = val
        couplings_d.append(term)

    return ModelSpec(
        n=n,
        P=P,
        amplification=tuple(amplification),
        self_signal=tuple(self_signal),
        outer=tuple(outer),
        inputs=tuple(inputs),
        couplings_c=tuple(couplings_c),
        couplings_d=tuple(couplings_d),
    )


def build_initials(document: dict, n: int) -> tuple[InitialCondition, ...]:
    out = []
    for idx, tab in enumerate(document.get("initial", []), start=1):
        sec = f"initial[{idx}]"
        phi = tab.get("phi")
        if not isinstance(phi, (list, tuple)) or len(phi) != n:
            raise ModelError(f"{sec}: phi must list one expression per component ({n})")
        exprs = tuple(
            _parse_field(sec, {"phi": text}, "phi", ("s",)) for text in phi
        )
        out.append(InitialCondition(phi=exprs, bound=_positive(sec, tab, "bound")))
    return tuple(out)
