"""Acceptance criteria 1-10, each at its stated tolerance.

Every test prints one ``criterion N: PASS|FAIL`` line; the lines are
repeated in the terminal summary.
"""
import numpy as np
import pytest

from nhreduce.cli import B_closed_form_residual, omega_mu_oracle, run_check
from nhreduce.examples import NAMES, leaf_area_matrix
from nhreduce.gauge import build_gauge
from nhreduce.integrate import integrate, standard_diagnostics
from nhreduce.mwreduce import build_leaf, lifted_state, omega_mu_matrix, phi_mu_pullback_matrix
from nhreduce.symmetry import assemble_momentum_ode, solve_momentum_ode
from nhreduce.system import nonholonomic_vector_field, oracle_pDdot

LEVEL = 0.7


def verdict(report, n, ok, detail):
    report(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    return ok


def checks(examples, gauges, leaves, name, names, samples, seed=3):
    ex = examples[name]
    c = np.full(ex.k, LEVEL)
    rng = np.random.default_rng(seed)
    return {n: run_check(n, ex, gauges[name], leaves[name], c, samples, rng)["max_residual"] for n in names}


def fmt(d):
    return ", ".join(f"{k} {v:.1e}" for k, v in d.items())


@pytest.fixture(scope="module")
def drifts(examples):
    out = {}
    for name, ex in examples.items():
        diags = standard_diagnostics(ex.system, ex.sections)
        traj = integrate(ex.system, ex.trajectory_state(), 1e-3, 10.0, diagnostics=diags)
        out[name] = {"H": traj.drift("energy"),
                     **{f"J_{i + 1}": traj.drift(f"J_{i + 1}") for i in range(ex.k)}}
    return out


def test_criterion_1_conservation(drifts, report):
    worst = {}
    ok = True
    for name, d in drifts.items():
        tol = 1e-6 if name == "solid_of_revolution" else 1e-8
        worst[name] = max(d.values())
        ok &= worst[name] <= tol
    assert verdict(report, 1, ok, "max relative drift over T=10, RK4 dt=1e-3: " + fmt(worst))


def test_criterion_2_oracle_equivalence(examples, report):
    worst = {}
    for name, ex in examples.items():
        rng = np.random.default_rng(1)
        w = 0.0
        for _ in range(100):
            s = ex.system.random_state(rng)
            a = nonholonomic_vector_field(ex.system, s).pDdot
            b = oracle_pDdot(ex.system, s)
            w = max(w, float(np.max(np.abs(a - b))) / max(1.0, float(np.max(np.abs(b)))))
        worst[name] = w
    assert verdict(report, 2, max(worst.values()) <= 1e-9, "almost-symplectic vs multiplier oracle: " + fmt(worst))


def test_criterion_3_momentum_relation(examples, gauges, leaves, report):
    worst = {n: checks(examples, gauges, leaves, n, ["momentum_relation"], 100)["momentum_relation"] for n in NAMES}
    assert verdict(report, 3, max(worst.values()) <= 1e-7, "i_eta Omega_B - dJ: " + fmt(worst))


def test_criterion_4_dynamical_condition(examples, gauges, leaves, report):
    worst = {}
    for n in NAMES:
        r = checks(examples, gauges, leaves, n, ["dynamical_condition", "reduced_dynamical_condition"], 100)
        worst[n] = max(r.values())
    assert verdict(report, 4, max(worst.values()) <= 1e-9, "|i_X B| and |i_X~ B~|: " + fmt(worst))


def test_criterion_5_closed_form_B(examples, gauges, report):
    worst = {}
    ok = True
    for n in ("particle", "snakeboard", "chaplygin_ball"):
        rng = np.random.default_rng(5)
        ex = examples[n]
        worst[n] = max(B_closed_form_residual(ex, gauges[n], ex.system.random_state(rng)) for _ in range(100))
        ok &= worst[n] <= (1e-8 if n == "chaplygin_ball" else 1e-10)
    assert verdict(report, 5, ok, "B residual: " + fmt(worst))


def ball_closed_form(ex, leaf, c, xb):
    """Sphere form plus (c' - mr^2 <gamma,Omega>) Phi with c' = -c, the level in the
    opposite orientation of the gauge section."""
    s = lifted_state(leaf, c, xb)
    gam = s.q[6:9]
    Om = ex.oracles["omega"](s.q, s.pD)
    c_prime = -float(c[0])
    coef = c_prime - ex.oracles["mr2"] * float(gam @ Om)
    return phi_mu_pullback_matrix(leaf, c, xb) + coef * leaf_area_matrix(xb)


def test_criterion_6_reduced_forms(examples, gauges, leaves, report):
    worst = {}
    basic = {}
    for n in NAMES:
        ex, leaf = examples[n], leaves[n]
        c = np.full(ex.k, LEVEL)
        rng = np.random.default_rng(6)
        w = 0.0
        for _ in range(50):
            xb = leaf.sample(rng)
            ref = ball_closed_form(ex, leaf, c, xb) if n == "chaplygin_ball" else omega_mu_oracle(ex, leaf, c, xb)
            w = max(w, float(np.max(np.abs(omega_mu_matrix(leaf, c, xb, gauge=gauges[n]) - ref))))
        worst[n] = w
        basic[n] = checks(examples, gauges, leaves, n, ["basic"], 50)["basic"]
    ex = examples["chaplygin_ball"]
    bare = build_gauge(ex.system, ex.sections, ex.reduced, omit_gauge=True)
    bare_leaf = build_leaf(bare)
    rng = np.random.default_rng(6)
    control = run_check("basic", ex, bare, bare_leaf, np.full(1, LEVEL), 10, rng)["max_residual"]
    ok = max(worst.values()) <= 1e-7 and max(basic.values()) <= 1e-7 and control > 1e-3
    assert verdict(report, 6, ok, f"omega_mu closed form: {fmt(worst)}; basic: {fmt(basic)}; "
                                  f"ball control without gauge {control:.1e}")


def test_criterion_7_shift_and_identification(examples, gauges, leaves, report):
    shift = {n: checks(examples, gauges, leaves, n, ["shift_pullback"], 100)["shift_pullback"] for n in NAMES}
    ident = {n: checks(examples, gauges, leaves, n, ["identification"], 50)["identification"] for n in NAMES}
    ok = max(shift.values()) <= 1e-7 and max(ident.values()) <= 1e-6
    ok &= all(ident[n] <= 1e-7 for n in NAMES if leaves[n].m == 1)
    assert verdict(report, 7, ok, f"shift: {fmt(shift)}; identification: {fmt(ident)}")


def test_criterion_8_projection_and_leaf_dynamics(examples, gauges, leaves, report):
    proj = {n: checks(examples, gauges, leaves, n, ["projection_consistency"], 100)["projection_consistency"]
            for n in NAMES}
    dyn = {n: checks(examples, gauges, leaves, n, ["leaf_dynamics"], 50)["leaf_dynamics"] for n in NAMES}
    ok = max(proj.values()) <= 1e-8 and max(dyn.values()) <= 1e-8
    assert verdict(report, 8, ok, f"projection: {fmt(proj)}; leaf dynamics: {fmt(dyn)}")


def test_criterion_9_casimirs(examples, gauges, leaves, report):
    worst = {n: checks(examples, gauges, leaves, n, ["casimir"], 20)["casimir"] for n in NAMES}
    assert verdict(report, 9, max(worst.values()) <= 1e-7, "X_f(J) over 20 invariant f: " + fmt(worst))


def test_criterion_10_momentum_ode(examples, drifts, report):
    ex = examples["particle"]
    st = ex.momentum_ode
    A = assemble_momentum_ode(ex.system, st.xi_basis, st.shape, st.probe_point)
    errA = max(abs(A(y)[0, 0] + y / (1 + y * y)) for y in np.linspace(-2, 2, 41))
    ex = examples["snakeboard"]
    st = ex.momentum_ode
    A = assemble_momentum_ode(ex.system, st.xi_basis, st.shape, st.probe_point)
    F = solve_momentum_ode(A, st.gamma_range, gamma0=st.gamma0)
    E = ex.extras["E_quadrature"]
    errF = max(abs(F(x)[0, 0] - E(x)) for x in np.linspace(*st.gamma_range, 41))
    A = examples["solid_of_revolution"].oracles["momentum_A"]
    probe = 0.0
    for x in np.linspace(-0.95, 0.95, 21):
        A(x)
        probe = max(probe, A.last_residual)
    solid_drift = max(drifts["solid_of_revolution"].values())
    ok = errA <= 1e-6 and errF <= 1e-8 and probe <= 1e-6 and solid_drift <= 1e-6
    assert verdict(report, 10, ok, f"particle A {errA:.1e}; snakeboard F vs quadrature {errF:.1e}; "
                                   f"solid probe {probe:.1e}, solid drift {solid_drift:.1e}")
