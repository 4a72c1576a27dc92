"""Built-in model families and scripted experiment recipes.

The `example5` pair is the two-neuron system with vanishing-delay tanh
couplings, decaying `exp(-t)` perturbations in every coefficient, and its
2pi-periodic partner obtained by dropping those perturbations; the remaining
builtins realize the static distributed-kernel family, the high-order model
with a product nonlinearity, and the low-order family with almost-periodic
coefficients driven by two incommensurate frequencies.

Recipes integrate a builtin from one or more bounded initial conditions and
turn the qualitative convergence claims into measured verdicts: pairwise
trajectory gaps, periodicity defects, and the negativity of the criterion
curve.  Everything a recipe decides is derivable from the curves it writes.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .criteria import (
    ConvergenceCurve,
    CriterionCurve,
    GapCurve,
    asymptotic_gap,
    h7_limsup,
    pair_convergence,
)
from .dde_core import IntegratorOptions, Trajectory, integrate
from .exprlang import compile_expr
from .model import (
    AsymptoticPair,
    InitialCondition,
    ModelError,
    ModelSpec,
    build_initials,
    build_model,
)

__all__ = [
    "BUILTIN_NAMES",
    "RECIPE_NAMES",
    "SELF_SLOPE_MIN",
    "TINY",
    "builtin",
    "builtin_document",
    "figure1_initial_conditions",
    "periodicity_defect",
    "RecipeOptions",
    "ExperimentReport",
    "run_recipe",
]

BUILTIN_NAMES = (
    "example5",
    "example5_asymptotic",
    "static_kernel",
    "highorder_periodic",
    "loworder_almostperiodic",
)

RECIPE_NAMES = (
    "figure12_reproduction",
    "self_attractivity",
    "static_periodic",
    "almostperiodic_convergence",
)

# Declared positive stand-in for Lipschitz slots the coupling shape never uses
# (e.g. the second argument of h(u1, u2) = tanh(u1)); every declared constant
# must be > 0, and this keeps its criterion contribution at rounding level.
TINY = 1e-12

# Recorded lower bound for the slope of u -> u*exp(sin(u)/(1+u^2)): a dense
# central-difference scan (>= 1e6 samples on [-10, 10], cross-checked against
# the closed-form derivative) gives min 0.545844...; declared shaved to 0.5448
# so the sampled slope check keeps a safety margin over the declaration.
SELF_SLOPE_MIN = 0.5448

SQRT2 = "1.4142135623730951"


def _per_neuron(entries: list[dict]) -> dict:
    return {str(i + 1): entry for i, entry in enumerate(entries)}


def _example5_document(asymptotic: bool) -> dict:
    decay = "" if asymptotic else "+exp(-t)"
    shift = "" if asymptotic else "+exp(-t)"
    doc = {
        "dimensions": {"n": 2, "P": 1},
        "amplification": _per_neuron([
            {"expr": "sin(u)+2", "a_lo": 1.0, "a_hi": 3.0},
            {"expr": "cos(u)+2", "a_lo": 1.0, "a_hi": 3.0},
        ]),
        "selfsignal": _per_neuron([
            {
                "expr": f"(4{shift})*u*exp(sin(u)/(1+u^2))",
                "beta_expr": f"{SELF_SLOPE_MIN}*(4{shift})",
            },
            {
                "expr": f"(5+cos(t){shift})*u",
                "beta_expr": f"5+cos(t){shift}",
            },
        ]),
        "outer": _per_neuron([
            {"F_expr": "u1", "zeta": 1.0, "sigma": TINY},
            {"F_expr": "u1", "zeta": 1.0, "sigma": TINY},
        ]),
        "input": _per_neuron([
            {"expr": f"exp(sin(t)){decay}"},
            {"expr": f"cos(t){decay}"},
        ]),
        "coupling_c": [
            {
                "i": 1, "j": 2, "l": 1, "p": 1,
                "c_expr": f"cos(t)/3{decay}",
                "h_expr": "tanh(u1)",
                "gamma1": 1.0, "gamma2": TINY,
                "tau_expr": "abs(sin(t))",
                "tau_tilde_expr": "0",
            },
            {
                "i": 2, "j": 1, "l": 1, "p": 1,
                "c_expr": f"2*sin(t)/3{decay}",
                "h_expr": "tanh(u1)",
                "gamma1": 1.0, "gamma2": TINY,
                "tau_expr": "abs(cos(t))",
                "tau_tilde_expr": "0",
            },
        ],
        "initial": [
            {"phi": ["-exp(s)/2", "cos(s)/2"], "bound": 2.0},
            {"phi": ["cos(s)/2", "-exp(s)/2"], "bound": 2.0},
            {"phi": ["sin(s)", "exp(s)-1"], "bound": 2.0},
        ],
    }
    return doc


def _ring(i: int, n: int) -> int:
    """Ring coupling target: neuron i listens to its successor."""
    return (i % n) + 1


def _wave(i: int) -> str:
    return "cos(t)" if i % 2 == 1 else "sin(t)"


def _static_kernel_document(n: int, c_amplitude: float, rate: float) -> dict:
    couplings = []
    for i in range(1, n + 1):
        j = _ring(i, n)
        couplings.append({
            "i": i, "j": j, "l": j, "p": 1,
            "d_expr": f"{c_amplitude!r}*{_wave(i)}",
            "f_expr": "u1", "mu1": 1.0, "mu2": TINY,
            "g_expr": "u", "g_tilde_expr": "u", "xi": 1.0, "xi_tilde": 1.0,
            "kernel": {"family": "exponential", "rate": rate},
            "kernel_tilde": {"family": "exponential", "rate": rate},
        })
    return {
        "dimensions": {"n": n, "P": 1},
        "amplification": _per_neuron([
            {"expr": "1.5+0.5*sin(u)", "a_lo": 1.0, "a_hi": 2.0} for _ in range(n)
        ]),
        "selfsignal": _per_neuron([
            {"expr": "u", "beta_expr": "1", "beta_star_expr": "1"} for _ in range(n)
        ]),
        "outer": _per_neuron([
            {"F_expr": "tanh(u2)", "zeta": TINY, "sigma": 1.0} for _ in range(n)
        ]),
        "input": _per_neuron([{"expr": "0"} for _ in range(n)]),
        "coupling_d": couplings,
        "initial": [
            {"phi": ["0.6", "-0.4"][:n] + ["0.2"] * max(0, n - 2), "bound": 2.0},
            {"phi": ["-0.5*cos(s)", "0.3"][:n] + ["-0.1"] * max(0, n - 2), "bound": 2.0},
        ],
    }


def _highorder_document(c_amp: float, d1_amp: float, d2_amp: float) -> dict:
    return {
        "dimensions": {"n": 2, "P": 2},
        "amplification": _per_neuron([
            {"expr": "1.5+0.5*cos(u)", "a_lo": 1.0, "a_hi": 2.0},
            {"expr": "1.5+0.5*cos(u)", "a_lo": 1.0, "a_hi": 2.0},
        ]),
        "selfsignal": _per_neuron([
            {"expr": "2*u", "beta_expr": "2", "beta_star_expr": "2"},
            {"expr": "2*u", "beta_expr": "2", "beta_star_expr": "2"},
        ]),
        "outer": _per_neuron([
            {"F_expr": "u1+u2", "zeta": 1.0, "sigma": 1.0},
            {"F_expr": "u1+u2", "zeta": 1.0, "sigma": 1.0},
        ]),
        "input": _per_neuron([{"expr": "0.5*sin(t)"}, {"expr": "0.5*cos(t)"}]),
        "coupling_c": [
            {
                "i": 1, "j": 2, "l": 1, "p": 1,
                "c_expr": f"{c_amp!r}*cos(t)", "h_expr": "tanh(u1)",
                "gamma1": 1.0, "gamma2": TINY,
                "tau_expr": "0", "tau_tilde_expr": "0",
            },
            {
                "i": 2, "j": 1, "l": 1, "p": 1,
                "c_expr": f"{c_amp!r}*sin(t)", "h_expr": "tanh(u1)",
                "gamma1": 1.0, "gamma2": TINY,
                "tau_expr": "0", "tau_tilde_expr": "0",
            },
        ],
        "coupling_d": [
            {
                "i": 1, "j": 2, "l": 1, "p": 1,
                "d_expr": f"{d1_amp!r}*sin(t)", "f_expr": "tanh(u1)",
                "mu1": 1.0, "mu2": TINY,
                "g_expr": "u", "g_tilde_expr": "u", "xi": 1.0, "xi_tilde": 1.0,
                "kernel": {"family": "exponential", "rate": 1.0},
                "kernel_tilde": {"family": "exponential", "rate": 1.0},
            },
            {
                "i": 2, "j": 1, "l": 1, "p": 1,
                "d_expr": f"{d1_amp!r}*cos(t)", "f_expr": "tanh(u1)",
                "mu1": 1.0, "mu2": TINY,
                "g_expr": "u", "g_tilde_expr": "u", "xi": 1.0, "xi_tilde": 1.0,
                "kernel": {"family": "exponential", "rate": 1.0},
                "kernel_tilde": {"family": "exponential", "rate": 1.0},
            },
            {
                # product nonlinearity f_j(.)f_l(.) mapped through two slots
                "i": 1, "j": 1, "l": 2, "p": 2,
                "d_expr": f"{d2_amp!r}*cos(t)", "f_expr": "tanh(u1)*tanh(u2)",
                "mu1": 1.0, "mu2": 1.0,  # M_l rho_j mu_j and M_j rho_l mu_l
                "g_expr": "u", "g_tilde_expr": "u", "xi": 1.0, "xi_tilde": 1.0,
                "kernel": {"family": "exponential", "rate": 1.0},
                "kernel_tilde": {"family": "exponential", "rate": 1.0},
            },
        ],
        "initial": [
            {"phi": ["0.4", "-0.3"], "bound": 2.0},
            {"phi": ["-0.2*cos(s)", "0.5"], "bound": 2.0},
        ],
    }


def _loworder_document(c_amp: float, d_amp: float, p_amp: float, decay: float) -> dict:
    ap = lambda lead: f"({lead}(t)+sin({SQRT2}*t))"
    couplings_c = []
    couplings_d = []
    for i in (1, 2):
        j = _ring(i, 2)
        lead = "sin" if i == 1 else "cos"
        couplings_c.append({
            "i": i, "j": j, "l": j, "p": 1,
            "c_expr": f"{c_amp!r}*{ap(lead)}+{decay!r}*exp(-t)",
            "h_expr": "tanh(u1)", "gamma1": 1.0, "gamma2": TINY,
            "tau_expr": "0", "tau_tilde_expr": "0",
        })
        couplings_c.append({
            "i": i, "j": j, "l": j, "p": 2,
            "c_expr": f"{d_amp!r}*{ap('cos' if i == 1 else 'sin')}+{decay!r}*exp(-t)",
            "h_expr": "tanh(u1)", "gamma1": 1.0, "gamma2": TINY,
            "tau_expr": f"0.5+0.3*sin({SQRT2}*t)", "tau_tilde_expr": "0",
        })
        couplings_d.append({
            "i": i, "j": j, "l": j, "p": 1,
            "d_expr": f"{p_amp!r}*{ap('cos' if i == 1 else 'sin')}+{decay!r}*exp(-t)",
            "f_expr": "u1", "mu1": 1.0, "mu2": TINY,
            "g_expr": "tanh(u)", "g_tilde_expr": "tanh(u)", "xi": 1.0, "xi_tilde": 1.0,
            "kernel": {"family": "exponential", "rate": 1.0},
            "kernel_tilde": {"family": "exponential", "rate": 1.0},
        })
    return {
        "dimensions": {"n": 2, "P": 2},
        "amplification": _per_neuron([
            {"expr": "1.5+0.5*sin(u)", "a_lo": 1.0, "a_hi": 2.0},
            {"expr": "1.5+0.5*sin(u)", "a_lo": 1.0, "a_hi": 2.0},
        ]),
        "selfsignal": _per_neuron([
            {"expr": "2*u", "beta_expr": "2"},
            {"expr": "2*u", "beta_expr": "2"},
        ]),
        "outer": _per_neuron([
            {"F_expr": "u1+u2", "zeta": 1.0, "sigma": 1.0},
            {"F_expr": "u1+u2", "zeta": 1.0, "sigma": 1.0},
        ]),
        "input": _per_neuron([
            {"expr": f"0.3*{ap('sin')}+{decay!r}*exp(-t)"},
            {"expr": f"0.3*{ap('cos')}+{decay!r}*exp(-t)"},
        ]),
        "coupling_c": couplings_c,
        "coupling_d": couplings_d,
        "initial": [
            {"phi": ["0.5", "-0.5"], "bound": 2.0},
            {"phi": ["-0.4*cos(s)", "0.3"], "bound": 2.0},
        ],
    }


def builtin_document(name: str, **params) -> dict:
    """The config document for a builtin, before validation."""
    if name == "example5":
        return _example5_document(asymptotic=False)
    if name == "example5_asymptotic":
        return _example5_document(asymptotic=True)
    if name == "static_kernel":
        return _static_kernel_document(
            n=int(params.get("n", 2)),
            c_amplitude=float(params.get("c_amplitude", 0.3)),
            rate=float(params.get("rate", 1.0)),
        )
    if name == "highorder_periodic":
        return _highorder_document(
            c_amp=float(params.get("c_amp", 0.3)),
            d1_amp=float(params.get("d1_amp", 0.2)),
            d2_amp=float(params.get("d2_amp", 0.1)),
        )
    if name == "loworder_almostperiodic":
        return _loworder_document(
            c_amp=float(params.get("c_amp", 0.15)),
            d_amp=float(params.get("d_amp", 0.1)),
            p_amp=float(params.get("p_amp", 0.1)),
            decay=float(params.get("decay", 0.05)),
        )
    raise ModelError(f"unknown builtin {name!r}; known: {BUILTIN_NAMES}")


def builtin(name: str, **params):
    """Build a validated builtin; `example5` yields the (base, partner) pair."""
    if name == "example5":
        base = build_model(_example5_document(asymptotic=False))
        partner = build_model(_example5_document(asymptotic=True))
        return AsymptoticPair(base=base, partner=partner)
    doc = builtin_document(name, **params)
    spec = build_model(doc)
    if name == "static_kernel":
        _check_static_inequality(spec, params)
    elif name == "highorder_periodic":
        _check_highorder_inequality(spec, params)
    elif name == "loworder_almostperiodic":
        _check_loworder_inequality(params)
        for term in spec.couplings_d:  # kernel moment condition of the family
            assert term.kernel.has_exponential_moment()
            assert term.kernel_tilde.has_exponential_moment()
    return spec


_PERIOD_GRID = np.linspace(0.0, 2.0 * math.pi, 721)


def _check_static_inequality(spec: ModelSpec, params) -> None:
    """Refuse parameters violating the periodic-attractor inequality
    a_lo_i beta_i(t) d_i > a_hi_i sum_j sigma_i |c_ij(t)| d_j on [0, omega]."""
    d = np.asarray(params.get("d", np.ones(spec.n)), dtype=float)
    worst = math.inf
    for i in range(spec.n):
        amp = spec.amplification[i]
        beta_fn = compile_expr(spec.self_signal[i].beta, ("t",))
        lhs = amp.a_lo * (np.asarray(beta_fn(_PERIOD_GRID), float)
                          + np.zeros_like(_PERIOD_GRID)) * d[i]
        rhs = np.zeros_like(_PERIOD_GRID)
        for term in spec.couplings_d:
            if term.i != i:
                continue
            c_fn = compile_expr(term.d, ("t",))
            rhs += (amp.a_hi * spec.outer[i].sigma
                    * np.abs(np.asarray(c_fn(_PERIOD_GRID), float)) * d[term.j])
        worst = min(worst, float(np.min(lhs - rhs)))
    if worst < -1e-12:
        raise ModelError(
            f"static_kernel parameters violate the periodic-attractor inequality "
            f"(worst margin {worst:.6g}); refusing to build a non-certified demo"
        )


def _check_highorder_inequality(spec: ModelSpec, params) -> None:
    """Refuse parameters violating the high-order periodic conditions; both the
    unstarred and amplification-weighted forms must hold on [0, omega]."""
    c_amp = float(params.get("c_amp", 0.3))
    d1_amp = float(params.get("d1_amp", 0.2))
    d2_amp = float(params.get("d2_amp", 0.1))
    beta, a_lo, a_hi = 2.0, 1.0, 2.0  # the builtin's fixed shape
    plain = beta - (c_amp + d1_amp + 2.0 * d2_amp)
    weighted = a_lo * beta - a_hi * (c_amp + d1_amp) - 2.0 * a_hi * d2_amp
    if min(plain, weighted) <= 0.0:
        raise ModelError(
            f"highorder_periodic parameters violate the periodic conditions "
            f"(margins {plain:.6g}, {weighted:.6g})"
        )


def _check_loworder_inequality(params) -> None:
    """Refuse parameters violating the almost-periodic weight condition
    d_i a_lo beta_i > sum_j a_hi d_j (c+ L^f + d+ L^g + p+ L^h)."""
    c_amp = float(params.get("c_amp", 0.15))
    d_amp = float(params.get("d_amp", 0.1))
    p_amp = float(params.get("p_amp", 0.1))
    beta, a_lo, a_hi = 2.0, 1.0, 2.0
    margin = a_lo * beta - a_hi * 2.0 * (c_amp + d_amp + p_amp)
    if margin <= 0.0:
        raise ModelError(
            f"loworder_almostperiodic parameters violate the weight condition "
            f"(margin {margin:.6g})"
        )


def figure1_initial_conditions() -> tuple[InitialCondition, ...]:
    return build_initials(_example5_document(asymptotic=False), 2)


# ---------------------------------------------------------------------------
# Metrics

def periodicity_defect(traj: Trajectory, omega: float, window: tuple[float, float],
                       dt: float = 0.01) -> float:
    """sup over the window of max_i |x_i(t + omega) - x_i(t)|."""
    if omega <= 0:
        raise ValueError("omega must be positive")
    t_a, t_b = window
    if t_b + omega > traj.t_end + 1e-9:
        raise ValueError(
            f"window [{t_a}, {t_b}] + omega {omega} exceeds trajectory end {traj.t_end}"
        )
    ts = np.minimum(np.arange(t_a, t_b + dt / 2, dt), traj.t_end - omega)
    now = traj.sample_many(ts)
    later = traj.sample_many(np.minimum(ts + omega, traj.t_end))
    return float(np.max(np.abs(later - now)))


def _sup_gap(traj_a: Trajectory, traj_b: Trajectory, lo: float, hi: float,
             dt: float = 0.01) -> float:
    hi = min(hi, traj_a.t_end, traj_b.t_end)
    ts = np.minimum(np.arange(lo, hi + dt / 2, dt), hi)
    return float(np.max(np.abs(traj_a.sample_many(ts) - traj_b.sample_many(ts))))


# ---------------------------------------------------------------------------
# Recipes

@dataclass(frozen=True)
class RecipeOptions:
    t_end: float = 40.0
    tol: float = 1e-2  # verdict tolerance for gaps and defects
    rel_tol: float = 1e-6  # verdicts live at 1e-2; stepping tighter than 1e-6 buys nothing
    abs_tol: float = 1e-8
    criterion_t_max: float = 200.0


@dataclass
class ExperimentReport:
    recipe: str
    model_names: tuple[str, ...]
    trajectories: list[Trajectory]
    convergence: dict[str, ConvergenceCurve]
    verdicts: dict[str, bool]
    measures: dict[str, float]
    criterion: CriterionCurve | None = None
    gap: GapCurve | None = None

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    def render(self) -> str:
        lines = [f"recipe: {self.recipe}", f"models: {', '.join(self.model_names)}"]
        for k, traj in enumerate(self.trajectories, start=1):
            lines.append(
                f"trajectory {k}: steps={traj.accepted_steps} "
                f"(+{traj.rejected_steps} rejected), max|x|={traj.max_abs_state:.4g}, "
                f"wall={traj.wall_clock:.2f}s"
            )
        for name, value in self.measures.items():
            lines.append(f"measure {name} = {value:.6g}")
        if self.criterion is not None:
            lines.append(self.criterion.render().rstrip())
        for name, ok in self.verdicts.items():
            lines.append(f"verdict {name}: {'PASS' if ok else 'FAIL'}")
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines) + "\n"

    def write(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for k, traj in enumerate(self.trajectories, start=1):
            (out / f"trajectory_{k}.csv").write_text(traj.to_csv(), encoding="utf-8")
        if self.convergence:
            names = list(self.convergence)
            grid = self.convergence[names[0]].grid
            lines = ["t," + ",".join(names)]
            for r, t in enumerate(grid):
                row = [repr(float(t))]
                row += [repr(float(self.convergence[nm].values[r])) for nm in names]
                lines.append(",".join(row))
            (out / "convergence.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
        if self.criterion is not None:
            (out / "criterion.csv").write_text(self.criterion.to_csv(), encoding="utf-8")
        (out / "report.txt").write_text(self.render(), encoding="utf-8")


def _thread_count() -> int:
    raw = os.environ.get("CGNN_LAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _integrate_all(spec: ModelSpec, ics, t0: float, t_end: float,
                   opts: IntegratorOptions) -> list[Trajectory]:
    workers = min(_thread_count(), len(ics))
    if workers <= 1:
        return [integrate(spec, ic, t0, t_end, opts) for ic in ics]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(integrate, spec, ic, t0, t_end, opts) for ic in ics]
        return [f.result() for f in futures]


def run_recipe(name: str, opts: RecipeOptions | None = None) -> ExperimentReport:
    opts = opts or RecipeOptions()
    if name == "figure12_reproduction":
        return _recipe_figure12(opts)
    if name == "self_attractivity":
        return _recipe_self_attractivity(opts)
    if name == "static_periodic":
        return _recipe_static_periodic(opts)
    if name == "almostperiodic_convergence":
        return _recipe_almostperiodic(opts)
    raise ValueError(f"unknown recipe {name!r}; known: {RECIPE_NAMES}")


def _recipe_figure12(opts: RecipeOptions) -> ExperimentReport:
    pair = builtin("example5")
    ics = figure1_initial_conditions()
    iopts = IntegratorOptions(rel_tol=opts.rel_tol, abs_tol=opts.abs_tol)
    trajs = _integrate_all(pair.base, ics, 0.0, opts.t_end, iopts)

    omega = 2.0 * math.pi
    convergence = {}
    measures = {}
    verdicts = {}
    window_lo = opts.t_end - 10.0
    for a in range(3):
        for b in range(a + 1, 3):
            key = f"gap_{a + 1}{b + 1}"
            convergence[key] = pair_convergence(trajs[a], trajs[b], omega)
            measures[key] = _sup_gap(trajs[a], trajs[b], window_lo, opts.t_end)
            verdicts[key] = measures[key] <= opts.tol
    defect = periodicity_defect(trajs[0], omega, (window_lo, opts.t_end - omega))
    measures["periodicity_defect"] = defect
    verdicts["periodicity_defect"] = defect <= opts.tol
    criterion = h7_limsup(pair.base, np.ones(2), t_max=opts.criterion_t_max)
    verdicts["criterion_negative"] = criterion.negative
    gap = asymptotic_gap(pair)
    verdicts["asymptotic_gap"] = gap.passed
    return ExperimentReport(
        recipe="figure12_reproduction",
        model_names=("example5", "example5_asymptotic"),
        trajectories=trajs,
        convergence=convergence,
        verdicts=verdicts,
        measures=measures,
        criterion=criterion,
        gap=gap,
    )


def _recipe_self_attractivity(opts: RecipeOptions) -> ExperimentReport:
    pair = builtin("example5")
    ics = figure1_initial_conditions()[:2]
    iopts = IntegratorOptions(rel_tol=opts.rel_tol, abs_tol=opts.abs_tol)
    trajs = _integrate_all(pair.base, ics, 0.0, opts.t_end, iopts)
    curve = pair_convergence(trajs[0], trajs[1], 2.0 * math.pi)
    final_gap = _sup_gap(trajs[0], trajs[1], opts.t_end - 2.0, opts.t_end)
    criterion = h7_limsup(pair.base, np.ones(2), t_max=opts.criterion_t_max)
    return ExperimentReport(
        recipe="self_attractivity",
        model_names=("example5",),
        trajectories=trajs,
        convergence={"gap_12": curve},
        measures={"gap_12": final_gap},
        verdicts={
            "gap_12": final_gap <= opts.tol,
            "criterion_negative": criterion.negative,
        },
        criterion=criterion,
    )


def _recipe_static_periodic(opts: RecipeOptions) -> ExperimentReport:
    spec = builtin("static_kernel")
    ics = build_initials(builtin_document("static_kernel"), spec.n)
    iopts = IntegratorOptions(rel_tol=opts.rel_tol, abs_tol=opts.abs_tol)
    trajs = _integrate_all(spec, ics, 0.0, opts.t_end, iopts)
    omega = 2.0 * math.pi
    curve = pair_convergence(trajs[0], trajs[1], omega)
    final_gap = _sup_gap(trajs[0], trajs[1], opts.t_end - 2.0, opts.t_end)
    defect = periodicity_defect(trajs[0], omega, (opts.t_end - 10.0, opts.t_end - omega))
    criterion = h7_limsup(spec, np.ones(spec.n), t_max=opts.criterion_t_max)
    return ExperimentReport(
        recipe="static_periodic",
        model_names=("static_kernel",),
        trajectories=trajs,
        convergence={"gap_12": curve},
        measures={"gap_12": final_gap, "periodicity_defect": defect},
        verdicts={
            "gap_12": final_gap <= opts.tol,
            "periodicity_defect": defect <= opts.tol,
            "criterion_negative": criterion.negative,
        },
        criterion=criterion,
    )


def _recipe_almostperiodic(opts: RecipeOptions) -> ExperimentReport:
    spec = builtin("loworder_almostperiodic")
    ics = build_initials(builtin_document("loworder_almostperiodic"), spec.n)
    iopts = IntegratorOptions(rel_tol=opts.rel_tol, abs_tol=opts.abs_tol)
    trajs = _integrate_all(spec, ics, 0.0, opts.t_end, iopts)
    curve = pair_convergence(trajs[0], trajs[1], 2.0 * math.pi)
    final_gap = _sup_gap(trajs[0], trajs[1], opts.t_end - 2.0, opts.t_end)
    criterion = h7_limsup(spec, np.ones(spec.n), t_max=opts.criterion_t_max)
    return ExperimentReport(
        recipe="almostperiodic_convergence",
        model_names=("loworder_almostperiodic",),
        trajectories=trajs,
        convergence={"gap_12": curve},
        measures={"gap_12": final_gap},
        verdicts={
            "gap_12": final_gap <= opts.tol,
            "criterion_negative": criterion.negative,
        },
        criterion=criterion,
    )
