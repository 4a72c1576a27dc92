"""Acceptance gate: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
report.  Tolerances are fixed here, not configurable.
"""

import math
import time

import numpy as np
import pytest

from oracles import euler_dde

from cgnn_lab.criteria import (
    InfeasibleWeightsError,
    SamplingWindows,
    find_weights,
    h7_limsup,
    h7_value,
    pair_convergence,
    validate_hypotheses,
)
from cgnn_lab.dde_core import IntegratorOptions, eval_V, integrate
from cgnn_lab.experiments import (
    RecipeOptions,
    builtin,
    builtin_document,
    figure1_initial_conditions,
    run_recipe,
)
from cgnn_lab.memory import history_new
from cgnn_lab.model import (
    ExponentialKernel,
    ModelError,
    build_initials,
    build_model,
    kernel_tail_cutoff,
)
from cgnn_lab.exprlang import parse_expr

GAP_TOL = 1e-2
WINDOWS = SamplingWindows(t_max=60.0, nt=241, nu=161)


def report(criterion: str, detail: str):
    print(f"ACCEPTANCE {criterion}: PASS  ({detail})")


@pytest.fixture(scope="module")
def figure_run():
    started = time.perf_counter()
    rep = run_recipe("figure12_reproduction", RecipeOptions(t_end=40.0))
    return rep, time.perf_counter() - started


@pytest.fixture(scope="module")
def example5_pair():
    return builtin("example5")


def test_criterion_1_figure_reproduction(figure_run):
    rep, elapsed = figure_run
    for key in ("gap_12", "gap_13", "gap_23"):
        assert rep.measures[key] <= GAP_TOL, f"{key} = {rep.measures[key]}"
    assert rep.measures["periodicity_defect"] <= GAP_TOL
    assert elapsed <= 30.0, f"runtime {elapsed:.1f}s exceeds the desk-scale budget"
    # boundedness witness: all three solutions stay inside a generous envelope
    for traj in rep.trajectories:
        assert traj.max_abs_state <= 10.0
    report("1 (figure 1-2 reproduction)",
           f"max pairwise gap {max(rep.measures[k] for k in ('gap_12', 'gap_13', 'gap_23')):.2e}, "
           f"defect {rep.measures['periodicity_defect']:.2e}, {elapsed:.1f}s")


def test_criterion_2_asymptotic_convergence(example5_pair):
    ic = figure1_initial_conditions()[0]
    opts = IntegratorOptions(rel_tol=1e-6, abs_tol=1e-8)
    base_traj = integrate(example5_pair.base, ic, 0.0, 40.0, opts)
    partner_traj = integrate(example5_pair.partner, ic, 0.0, 40.0, opts)
    curve = pair_convergence(base_traj, partner_traj, 2.0 * math.pi)
    assert curve.final <= GAP_TOL, f"final gap {curve.final}"
    report("2 (base vs asymptotic partner)", f"final window gap {curve.final:.2e}")


def test_criterion_3_self_attractivity(figure_run):
    rep, _ = figure_run
    trajs = rep.trajectories
    final = []
    for a, b in ((0, 1), (0, 2), (1, 2)):
        curve = pair_convergence(trajs[a], trajs[b], 2.0 * math.pi)
        assert curve.final <= GAP_TOL
        final.append(curve.final)
    report("3 (two solutions of one system)", f"final gaps {max(final):.2e}")


def test_criterion_4_h7_limsup_anchors():
    partner = builtin("example5_asymptotic")
    curve = h7_limsup(partner, (1.0, 1.0), t_max=200.0)
    assert np.all(curve.limsup_estimate <= -1.0), curve.limsup_estimate
    # derived anchors: component 1 sits at 1 - 4m for the recorded slope m,
    # component 2 at -5 + sqrt(5)
    assert curve.limsup_estimate[0] == pytest.approx(1.0 - 4.0 * 0.5448, abs=5e-3)
    assert curve.limsup_estimate[1] == pytest.approx(-5.0 + math.sqrt(5.0), abs=5e-3)
    report("4 (criterion limsup with unit weights)",
           f"estimates {np.array2string(curve.limsup_estimate, precision=4)}")


def test_criterion_5_integrator_oracles(example5_pair):
    ic = figure1_initial_conditions()[0]
    ts, xs = euler_dde(example5_pair.base, ic, 0.0, 5.0, 1e-4)
    traj = integrate(example5_pair.base, ic, 0.0, 5.0)
    sup_err = float(np.max(np.abs(traj.sample_many(ts) - xs)))
    assert sup_err <= 1e-3, f"sup-norm deviation from Euler oracle: {sup_err}"

    doc = {
        "dimensions": {"n": 1, "P": 1},
        "amplification": {"1": {"expr": "1", "a_lo": 1.0, "a_hi": 1.0}},
        "selfsignal": {"1": {"expr": "u", "beta_expr": "1"}},
        "outer": {"1": {"F_expr": "u1", "zeta": 1.0, "sigma": 1e-12}},
        "input": {"1": {"expr": "0"}},
        "initial": [{"phi": ["1"], "bound": 2.0}],
    }
    spec = build_model(doc)
    scalar_ic = build_initials(doc, 1)[0]
    decay = integrate(spec, scalar_ic, 0.0, 1.0)
    final_err = abs(decay.sample(1.0)[0] - math.exp(-1.0))
    assert final_err <= 1e-6

    errs = []
    for h in (0.1, 0.05, 0.025):
        opts = IntegratorOptions(h_init=h, h_min=h, h_max=h, adaptive=False)
        run = integrate(spec, scalar_ic, 0.0, 1.0, opts)
        errs.append(abs(run.sample(1.0)[0] - math.exp(-1.0)))
    ratios = [c / f for c, f in zip(errs, errs[1:])]
    assert all(6.0 <= r <= 10.0 for r in ratios), ratios
    report("5 (integrator oracle equivalence)",
           f"euler sup err {sup_err:.2e}, decay err {final_err:.2e}, "
           f"halving ratios {[f'{r:.2f}' for r in ratios]}")


def test_criterion_6_quadrature():
    doc = {
        "dimensions": {"n": 1, "P": 1},
        "amplification": {"1": {"expr": "1", "a_lo": 1.0, "a_hi": 1.0}},
        "selfsignal": {"1": {"expr": "u", "beta_expr": "1"}},
        "outer": {"1": {"F_expr": "u1", "zeta": 1e-12, "sigma": 1.0}},
        "input": {"1": {"expr": "0"}},
        "coupling_d": [{
            "i": 1, "j": 1, "l": 1, "p": 1,
            "d_expr": "1", "f_expr": "u1", "mu1": 1.0, "mu2": 1e-12,
            "g_expr": "u", "g_tilde_expr": "u", "xi": 1.0, "xi_tilde": 1.0,
            "kernel": {"family": "exponential", "rate": 1.0},
            "kernel_tilde": {"family": "exponential", "rate": 1.0},
        }],
    }
    spec = build_model(doc)
    const_hist = history_new([parse_expr("0.75", ("s",))], 0.0, 1.0)
    const_err = abs(eval_V(spec, 1, 0.0, const_hist) - 0.75)
    assert const_err <= 1e-8

    exp_hist = history_new([parse_expr("exp(s)", ("s",))], 0.0, 1.5)
    analytic_err = abs(eval_V(spec, 1, 0.0, exp_hist) - 0.5)
    assert analytic_err <= 1e-6

    cutoff = kernel_tail_cutoff(ExponentialKernel(1.0), 1e-6)
    assert abs(cutoff - math.log(1e6)) <= 1e-3
    report("6 (distributed-delay quadrature)",
           f"constant err {const_err:.1e}, analytic err {analytic_err:.1e}, "
           f"cutoff {cutoff:.4f}")


def test_criterion_7_criterion_invariances(example5_pair):
    base = example5_pair.base
    v1 = h7_value(base, (1.0, 1.0), 0.3)
    assert np.array_equal(v1, h7_value(base, (7.0, 7.0), 0.3))
    assert np.array_equal(v1, h7_value(base, (2.0, 2.0), 0.3))

    d, radius = find_weights(base)
    assert h7_limsup(base, d).negative

    overcoupled = {
        "dimensions": {"n": 1, "P": 1},
        "amplification": {"1": {"expr": "1", "a_lo": 1.0, "a_hi": 1.0}},
        "selfsignal": {"1": {"expr": "u", "beta_expr": "1"}},
        "outer": {"1": {"F_expr": "u1", "zeta": 1.0, "sigma": 1e-12}},
        "input": {"1": {"expr": "0"}},
        "coupling_c": [{
            "i": 1, "j": 1, "l": 1, "p": 1,
            "c_expr": "5", "h_expr": "u1", "gamma1": 1.0, "gamma2": 1e-12,
            "tau_expr": "0", "tau_tilde_expr": "0",
        }],
    }
    with pytest.raises(InfeasibleWeightsError) as err:
        find_weights(build_model(overcoupled))
    assert err.value.radius >= 1.0
    report("7 (criterion invariances)",
           f"scale-invariant, weights radius {radius:.3f}, "
           f"overcoupled radius {err.value.radius:.1f} infeasible")


def test_criterion_8_falsification_corpus():
    clean = validate_hypotheses(build_model(builtin_document("example5")), WINDOWS)
    assert clean.ok(), clean.render()

    planted = []
    doc = builtin_document("example5")
    doc["amplification"]["1"]["a_hi"] = 2.5
    rep = validate_hypotheses(build_model(doc), WINDOWS)
    assert rep.verdicts["H2"] == "fail" and rep.witnesses["H2"].observed > 2.5
    planted.append(f"H2 witness a={rep.witnesses['H2'].observed:.3f}")

    doc = builtin_document("example5")
    doc["coupling_c"][0]["gamma1"] = 0.5
    rep = validate_hypotheses(build_model(doc), WINDOWS)
    assert rep.verdicts["H5"] == "fail" and rep.witnesses["H5"].observed > 0.5
    planted.append(f"H5 witness slope={rep.witnesses['H5'].observed:.3f}")

    doc = builtin_document("example5")
    doc["coupling_c"][0]["tau_expr"] = "t"
    rep = validate_hypotheses(build_model(doc), WINDOWS)
    assert rep.verdicts["H4"] == "fail"
    planted.append("H4 witness t-tau(t) stuck at 0")

    report("8 (falsification corpus)", "; ".join(planted))


def test_criterion_9_static_builtin():
    with pytest.raises(ModelError):
        builtin("static_kernel", c_amplitude=1.6)

    rep = run_recipe("static_periodic", RecipeOptions(t_end=40.0))
    assert rep.verdicts["gap_12"], rep.measures
    assert rep.measures["periodicity_defect"] <= GAP_TOL
    assert rep.passed
    report("9 (static distributed-kernel family)",
           f"gap {rep.measures['gap_12']:.2e}, "
           f"defect {rep.measures['periodicity_defect']:.2e}, refusal enforced")
