import math

import numpy as np
import pytest

from cgnn_lab.criteria import (
    InfeasibleWeightsError,
    SamplingWindows,
    asymptotic_gap,
    find_weights,
    h7_limsup,
    h7_value,
    pair_convergence,
    validate_hypotheses,
)
from cgnn_lab.dde_core import integrate
from cgnn_lab.experiments import TINY, builtin, builtin_document
from cgnn_lab.model import AsymptoticPair, build_initials, build_model

WINDOWS = SamplingWindows(t_max=60.0, nt=241, nu=161)


def constant_demo_document(n=2, beta=4.0, coupling=2.0, diagonal=False):
    """Constant-coefficient system with decay floor beta and coupling matrix
    having `coupling` on the ring (or diagonal)."""
    doc = {
        "dimensions": {"n": n, "P": 1},
        "amplification": {str(i): {"expr": "1", "a_lo": 1.0, "a_hi": 1.0}
                          for i in range(1, n + 1)},
        "selfsignal": {str(i): {"expr": f"{beta!r}*u", "beta_expr": repr(beta)}
                       for i in range(1, n + 1)},
        "outer": {str(i): {"F_expr": "u1", "zeta": 1.0, "sigma": TINY}
                  for i in range(1, n + 1)},
        "input": {str(i): {"expr": "0"} for i in range(1, n + 1)},
        "coupling_c": [],
        "initial": [{"phi": ["0.5"] * n, "bound": 1.0}],
    }
    for i in range(1, n + 1):
        j = i if diagonal else (i % n) + 1
        doc["coupling_c"].append({
            "i": i, "j": j, "l": j, "p": 1,
            "c_expr": repr(coupling), "h_expr": "u1",
            "gamma1": 1.0, "gamma2": TINY,
            "tau_expr": "0", "tau_tilde_expr": "0",
        })
    return doc


class TestH7Value:
    def test_zero_couplings_gives_minus_beta(self):
        doc = constant_demo_document(n=2, beta=1.0)
        doc["coupling_c"] = []
        spec = build_model(doc)
        np.testing.assert_allclose(h7_value(spec, (1.0, 1.0), 3.0), [-1.0, -1.0])

    def test_example5_component2_hand_value(self):
        pair = builtin("example5")
        t = math.pi / 2
        expected = -(5.0 + math.exp(-t)) + 3.0 * (2.0 / 3.0 + math.exp(-t))
        got = h7_value(pair.base, (1.0, 1.0), t)
        assert got[1] == pytest.approx(expected, abs=1e-9)

    def test_scale_invariance_equal_weights_exact(self):
        pair = builtin("example5")
        v1 = h7_value(pair.base, (1.0, 1.0), 0.7)
        v7 = h7_value(pair.base, (7.0, 7.0), 0.7)
        assert np.array_equal(v1, v7)

    def test_scale_invariance_power_of_two_exact(self):
        doc = constant_demo_document(n=2, beta=4.0, coupling=1.5)
        spec = build_model(doc)
        d = np.array([1.0, 3.0])
        assert np.array_equal(h7_value(spec, d, 2.0), h7_value(spec, 2.0 * d, 2.0))

    def test_scale_invariance_general_near_exact(self):
        doc = constant_demo_document(n=2, beta=4.0, coupling=1.5)
        spec = build_model(doc)
        d = np.array([1.0, 3.0])
        np.testing.assert_allclose(h7_value(spec, d, 2.0), h7_value(spec, 7.0 * d, 2.0),
                                   rtol=1e-14)

    def test_monotone_in_coupling_magnitude(self):
        base = build_model(constant_demo_document(coupling=2.0))
        bigger = build_model(constant_demo_document(coupling=2.2))
        v_base = h7_value(base, (1.0, 1.0), 1.0)
        v_big = h7_value(bigger, (1.0, 1.0), 1.0)
        assert np.all(v_big >= v_base)

    def test_monotone_in_beta(self):
        lo = build_model(constant_demo_document(beta=4.0))
        hi = build_model(constant_demo_document(beta=4.4))
        assert np.all(h7_value(hi, (1.0, 1.0), 1.0) <= h7_value(lo, (1.0, 1.0), 1.0))

    def test_monotone_in_distributed_magnitude(self):
        def doc_with_d(amp):
            doc = constant_demo_document(n=1, beta=4.0, coupling=1.0)
            doc["coupling_c"] = []
            doc["outer"]["1"]["sigma"] = 1.0
            doc["coupling_d"] = [{
                "i": 1, "j": 1, "l": 1, "p": 1,
                "d_expr": repr(amp), "f_expr": "u1", "mu1": 1.0, "mu2": TINY,
                "g_expr": "u", "g_tilde_expr": "u", "xi": 1.0, "xi_tilde": 1.0,
                "kernel": {"family": "exponential", "rate": 1.0},
                "kernel_tilde": {"family": "exponential", "rate": 1.0},
            }]
            return doc

        base = h7_value(build_model(doc_with_d(1.0)), (1.0,), 2.0)
        perturbed = h7_value(build_model(doc_with_d(1.1)), (1.0,), 2.0)
        assert np.all(perturbed >= base)

    def test_rejects_bad_weights(self):
        spec = build_model(constant_demo_document())
        with pytest.raises(ValueError):
            h7_value(spec, (1.0, -1.0), 0.0)
        with pytest.raises(ValueError):
            h7_value(spec, (1.0,), 0.0)


class TestH7Limsup:
    def test_example5_partner_anchors(self):
        partner = builtin("example5_asymptotic")
        curve = h7_limsup(partner, (1.0, 1.0), t_max=200.0)
        assert curve.negative
        assert np.all(curve.limsup_estimate <= -1.0)
        # analytic tail sups: -4 m + 1 with the recorded slope m, and -5 + sqrt(5)
        assert curve.limsup_estimate[0] == pytest.approx(-4 * 0.5448 + 1.0, abs=2e-3)
        assert curve.limsup_estimate[1] == pytest.approx(-5.0 + math.sqrt(5.0), abs=2e-3)

    def test_zero_coupling_estimate_exact(self):
        doc = constant_demo_document(n=1, beta=1.0)
        doc["coupling_c"] = []
        spec = build_model(doc)
        curve = h7_limsup(spec, (1.0,), t_max=50.0)
        assert curve.limsup_estimate[0] == -1.0

    def test_overcoupled_scalar_fails(self):
        # single neuron, zeta * a_hi * gamma * c = 5 against beta = 1
        spec = build_model(constant_demo_document(n=1, beta=1.0, coupling=5.0))
        curve = h7_limsup(spec, (1.0,), t_max=50.0)
        assert curve.limsup_estimate[0] == pytest.approx(4.0, abs=1e-10)
        assert not curve.negative

    def test_curve_csv_shape(self):
        spec = builtin("example5_asymptotic")
        curve = h7_limsup(spec, (1.0, 1.0), t_max=10.0, grid_step=0.5)
        lines = curve.to_csv().strip().split("\n")
        assert lines[0] == "t,value_1,value_2"
        assert len(lines) == len(curve.grid) + 1


class TestFindWeights:
    def test_symmetric_ring_demo(self):
        spec = build_model(constant_demo_document(n=2, beta=4.0, coupling=2.0))
        d, radius = find_weights(spec)
        assert radius == pytest.approx(0.5, abs=1e-9)
        np.testing.assert_allclose(d, [1.0, 1.0], atol=1e-9)
        curve = h7_limsup(spec, d)
        assert curve.negative
        assert np.all(np.abs(curve.limsup_estimate + 2.0) <= 1e-9)

    def test_overcoupled_scalar_infeasible(self):
        spec = build_model(constant_demo_document(n=1, beta=1.0, coupling=5.0))
        with pytest.raises(InfeasibleWeightsError) as err:
            find_weights(spec)
        assert err.value.radius == pytest.approx(5.0, abs=1e-6)

    def test_diagonal_decoupled(self):
        spec = build_model(constant_demo_document(n=2, beta=4.0, coupling=1.0,
                                                  diagonal=True))
        d, radius = find_weights(spec)
        assert radius == pytest.approx(0.25, abs=1e-9)
        np.testing.assert_allclose(d, [1.0, 1.0], atol=1e-9)

    def test_soundness_returned_weights_verify(self):
        rng = np.random.default_rng(5)
        feasible = infeasible = 0
        for _ in range(12):
            beta = float(rng.uniform(0.5, 4.0))
            coupling = float(rng.uniform(0.1, 3.0))
            spec = build_model(constant_demo_document(beta=beta, coupling=coupling))
            try:
                d, radius = find_weights(spec)
            except InfeasibleWeightsError:
                infeasible += 1
                continue
            feasible += 1
            assert h7_limsup(spec, d).negative
        assert feasible and infeasible  # the sweep must exercise both branches

    def test_asymmetric_coupling(self):
        doc = constant_demo_document(n=2, beta=4.0, coupling=1.0)
        doc["coupling_c"][1]["c_expr"] = "3"  # K = [[0,1],[3,0]], radius sqrt(3/16)
        spec = build_model(doc)
        d, radius = find_weights(spec)
        assert radius == pytest.approx(math.sqrt(3.0 / 16.0), abs=1e-6)
        assert h7_limsup(spec, d).negative


class TestValidateHypotheses:
    def test_example5_passes(self):
        pair = builtin("example5")
        report = validate_hypotheses(pair.base, WINDOWS)
        assert report.ok(), report.render()
        assert report.verdicts["H2"] == "pass-sampled"

    def test_planted_amplification_range_violation(self):
        doc = builtin_document("example5")
        doc["amplification"]["1"]["a_hi"] = 2.5  # sin(u)+2 reaches 3
        report = validate_hypotheses(build_model(doc), WINDOWS)
        assert report.verdicts["H2"] == "fail"
        witness = report.witnesses["H2"]
        assert witness.observed > 2.5
        assert "a[1] upper" in witness.where

    def test_planted_halved_lipschitz_violation(self):
        doc = builtin_document("example5")
        doc["coupling_c"][0]["gamma1"] = 0.5  # tanh has slope 1 at the origin
        report = validate_hypotheses(build_model(doc), WINDOWS)
        assert report.verdicts["H5"] == "fail"
        assert report.witnesses["H5"].observed > 0.5

    def test_planted_delay_growth_violation(self):
        doc = builtin_document("example5")
        doc["coupling_c"][0]["tau_expr"] = "t"  # t - tau(t) stays at 0
        report = validate_hypotheses(build_model(doc), WINDOWS)
        assert report.verdicts["H4"] == "fail"

    def test_unbounded_delay_offset_violation(self):
        doc = builtin_document("example5")
        doc["coupling_c"][0]["tau_expr"] = "t+1"  # t - tau(t) = -1
        report = validate_hypotheses(build_model(doc), WINDOWS)
        assert report.verdicts["H4"] == "fail"

    def test_planted_slope_violation(self):
        doc = builtin_document("example5")
        doc["selfsignal"]["2"]["beta_expr"] = "6+cos(t)+exp(-t)"  # true slope is 5+...
        report = validate_hypotheses(build_model(doc), WINDOWS)
        assert report.verdicts["H3"] == "fail"

    def test_growing_input_flagged(self):
        doc = builtin_document("example5")
        doc["input"]["1"]["expr"] = "t"
        report = validate_hypotheses(build_model(doc), WINDOWS)
        assert report.verdicts["H1"] == "fail"

    def test_render_contains_verdicts(self):
        pair = builtin("example5")
        text = validate_hypotheses(pair.base, WINDOWS).render()
        for hyp in ("H1", "H4", "H7"):
            assert hyp in text


class TestAsymptoticGap:
    def test_example5_pair_passes_with_known_value(self):
        pair = builtin("example5")
        gap = asymptotic_gap(pair)
        assert gap.passed
        k = int(round(20.0 / 0.1))
        assert gap.curves["c_1211"][k] == pytest.approx(math.exp(-20.0), abs=1e-11)

    def test_pair_with_itself_identically_zero(self):
        base = builtin("example5").base
        gap = asymptotic_gap(AsymptoticPair(base=base, partner=base))
        for name, values in gap.curves.items():
            assert np.all(values == 0.0), name
        assert gap.passed

    def test_non_vanishing_difference_fails(self):
        doc1 = constant_demo_document(coupling=1.0)
        doc2 = constant_demo_document(coupling=2.0)
        pair = AsymptoticPair(base=build_model(doc1), partner=build_model(doc2))
        gap = asymptotic_gap(pair)
        assert not gap.passed
        assert not gap.verdicts["c_1221"]


class TestPairConvergence:
    def _const_traj(self, value, t_end=30.0):
        doc = constant_demo_document(n=1, beta=1.0, coupling=1.0)
        doc["coupling_c"] = []
        doc["selfsignal"]["1"] = {"expr": "0", "beta_expr": "0"}
        doc["initial"] = [{"phi": [repr(value)], "bound": 2.0}]
        spec = build_model(doc)
        ic = build_initials(doc, 1)[0]
        return integrate(spec, ic, 0.0, t_end)  # x' = 0: constant trajectory

    def test_identical_trajectories(self):
        t = self._const_traj(0.4)
        curve = pair_convergence(t, t, 2.0)
        assert np.all(curve.values == 0.0)
        assert curve.converged()

    def test_separated_constants(self):
        a = self._const_traj(0.0)
        b = self._const_traj(1.0)
        curve = pair_convergence(a, b, 2.0)
        assert np.all(np.abs(curve.values - 1.0) <= 1e-12)
        assert not curve.converged()

    def test_needs_three_windows(self):
        a = self._const_traj(0.0, t_end=5.0)
        with pytest.raises(ValueError, match="3 windows"):
            pair_convergence(a, a, 2.0)
