import json

import numpy as np
import pytest

import splitbreg as sb
from splitbreg.diagnostics import (Certificate, certificates_to_json, dual_certificate,
                                   duality_gap, equivalence_report, primal_recovery_check,
                                   summability_report, weak_duality_probe)
from splitbreg.functionals import ProxFunctional, prox_l1, prox_quadratic
from splitbreg.linops import identity_operator
from splitbreg.oracles import soft_threshold_optimum


def scalar_lasso(y=3.0, mu=1.0):
    return sb.SplitProblem(g=prox_quadratic(np.array([y]), 1.0),
                           f=prox_l1(mu, dim=1), L=identity_operator(1), lam=1.0)


def test_duality_gap_at_known_optimal_pair(lasso_problem):
    y = lasso_problem.g.params["target"]
    mu = float(lasso_problem.f.params["weights"][0])
    u_star = soft_threshold_optimum(y, mu)
    b_star = np.clip(y, -mu, mu)  # dual optimum of the shrinkage problem
    assert abs(duality_gap(lasso_problem, u_star, b_star)) <= 1e-8


def test_duality_gap_positive_off_optimum(lasso_problem):
    y = lasso_problem.g.params["target"]
    mu = float(lasso_problem.f.params["weights"][0])
    b_star = np.clip(y, -mu, mu)
    u_bad = np.zeros_like(y)
    assert duality_gap(lasso_problem, u_bad, b_star) > 1e-3


def test_weak_duality_on_random_probes(lasso_problem, tv1d_problem):
    for prob in (lasso_problem, tv1d_problem):
        assert weak_duality_probe(prob, n_probes=500, seed=1) >= -1e-9


def test_duality_gap_requires_conjugates():
    bare = ProxFunctional(dim=1, value=lambda x: 0.0,
                          prox=lambda x, t: np.asarray(x, dtype=float),
                          label="mystery")
    prob = sb.SplitProblem(g=prox_quadratic(np.zeros(1), 1.0), f=bare,
                           L=identity_operator(1), lam=1.0)
    with pytest.raises(ValueError, match="mystery"):
        duality_gap(prob, np.zeros(1), np.zeros(1))


def test_dual_certificate_on_converged_lasso():
    prob = scalar_lasso()
    trace = sb.asb_iterate(prob, stop=sb.StoppingRule(tol=1e-13, max_iter=2000))
    cert = dual_certificate(prob, trace.final.b, trace.final.d)
    assert cert.passed and cert.defect <= 1e-7

    perturbed = trace.final.b.copy()
    perturbed[0] += 0.1
    bad = dual_certificate(prob, perturbed, trace.final.d)
    assert not bad.passed and bad.defect >= 1e-3


def test_dual_certificate_zero_problem():
    # both terms inert: f with zero weights, g centred at the origin
    prob = sb.SplitProblem(g=prox_quadratic(np.zeros(2), 1.0), f=prox_l1(0.0, dim=2),
                           L=identity_operator(2), lam=1.0)
    cert = dual_certificate(prob, np.zeros(2), np.zeros(2))
    assert cert.passed and cert.defect == 0.0


def test_primal_recovery_check(tv1d_problem, tv1d_instance):
    from splitbreg.oracles import taut_string_dirichlet

    trace = sb.asb_iterate(tv1d_problem, stop=sb.StoppingRule(tol=1e-12, max_iter=20_000))
    h = tv1d_instance.grid.spacing[0]
    u_star = taut_string_dirichlet(tv1d_instance.noisy_signal, tv1d_instance.mu / h)
    v_star = tv1d_problem.g.value(u_star) + tv1d_problem.f.value(tv1d_problem.L.apply(u_star))
    good = primal_recovery_check(tv1d_problem, trace.final.u, trace.final.d, v_star)
    assert good.passed

    bad = primal_recovery_check(tv1d_problem, np.zeros(32), trace.final.d, v_star)
    assert not bad.passed


def test_primal_recovery_fully_constrained_instance():
    anchor = np.array([1.0, -2.0, 0.5])
    prob = sb.SplitProblem(g=sb.prox_indicator_point(anchor), f=prox_l1(0.0, dim=3),
                           L=identity_operator(3), lam=1.0)
    cert = primal_recovery_check(prob, anchor, anchor, v_star=0.0)
    assert cert.passed and cert.defect == 0.0


def test_equivalence_report_paths(lasso_problem):
    stop = sb.StoppingRule(tol=None, max_iter=60)
    init = sb.initial_state(lasso_problem)
    ta = sb.asb_iterate(lasso_problem, init=init, stop=stop)
    td = sb.run_drs(lasso_problem, init=init, stop=stop)
    assert equivalence_report(ta, td, lasso_problem.lam).passed

    td_wrong = sb.run_drs(lasso_problem, init=init, stop=stop, lam_override=2.0)
    assert not equivalence_report(ta, td_wrong, lasso_problem.lam).passed

    short = sb.asb_iterate(lasso_problem, init=init, stop=sb.StoppingRule(tol=None, max_iter=10))
    with pytest.raises(ValueError, match="length"):
        equivalence_report(short, td, lasso_problem.lam)


def test_equivalence_zero_iterations(lasso_problem):
    stop = sb.StoppingRule(tol=None, max_iter=0)
    init = sb.initial_state(lasso_problem)
    ta = sb.asb_iterate(lasso_problem, init=init, stop=stop)
    td = sb.run_drs(lasso_problem, init=init, stop=stop)
    cert = equivalence_report(ta, td, lasso_problem.lam)
    assert cert.passed and cert.defect == 0.0


def test_summability_report_shapes():
    prob = scalar_lasso()
    trace = sb.asb_iterate(prob, stop=sb.StoppingRule(tol=None, max_iter=1000))
    rep = summability_report(trace)
    assert rep.partial_sums.shape == (1000,)
    assert rep.tail_increment < 1e-10
    assert np.all(np.diff(rep.partial_sums) >= 0)

    one = sb.asb_iterate(prob, stop=sb.StoppingRule(tol=None, max_iter=1))
    rep1 = summability_report(one)
    assert rep1.partial_sums.shape == (1,)
    assert rep1.partial_sums[0] == one.residuals[0] ** 2

    # already-optimal initialization: all residuals identically zero
    zero_prob = sb.SplitProblem(g=prox_quadratic(np.zeros(3), 1.0), f=prox_l1(1.0, dim=3),
                                L=identity_operator(3), lam=1.0)
    z = sb.asb_iterate(zero_prob, stop=sb.StoppingRule(tol=None, max_iter=20))
    assert np.all(summability_report(z).partial_sums == 0.0)


def test_certificates_are_deterministic(lasso_problem):
    trace = sb.asb_iterate(lasso_problem, stop=sb.StoppingRule(tol=1e-12, max_iter=2000))
    c1 = dual_certificate(lasso_problem, trace.final.b, trace.final.d)
    c2 = dual_certificate(lasso_problem, trace.final.b.copy(), trace.final.d.copy())
    assert c1.defect == c2.defect  # bit-for-bit

    payload = json.loads(certificates_to_json([c1]))
    assert payload[0]["kind"] == "dual_optimal"
    assert set(payload[0]) == {"kind", "defect", "tolerance", "passed", "details"}


def test_certificate_passed_definition():
    cert = Certificate.from_defect("dual_optimal", 2e-7, 1e-7)
    assert not cert.passed
    assert Certificate.from_defect("dual_optimal", 1e-8, 1e-7).passed


def test_run_trace_validates_lengths(lasso_problem):
    trace = sb.asb_iterate(lasso_problem, stop=sb.StoppingRule(tol=None, max_iter=5))
    with pytest.raises(ValueError, match="one entry per iteration"):
        sb.RunTrace(kind="asb", lam=1.0, iterates=trace.iterates,
                    residuals=trace.residuals[:-1], energies=trace.energies,
                    setzer_defects=trace.setzer_defects, x_increments=trace.x_increments,
                    wall_times=trace.wall_times, alpha_injected=trace.alpha_injected,
                    beta_injected=trace.beta_injected, converged=False, n_iter=5)
