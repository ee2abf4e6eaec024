import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nhreduce.examples import DEFAULTS, NAMES, ParameterError, build_example, spheroid_profile
from nhreduce.system import velocity


def test_defaults():
    assert DEFAULTS["snakeboard"] == {"m": 1.0, "r": 1.0, "J": 0.5, "J0": 0.2}
    assert DEFAULTS["chaplygin_ball"]["I1"] == 1.0 and DEFAULTS["chaplygin_ball"]["I3"] == 3.0
    for name in NAMES:
        ex = build_example(name)
        assert ex.name == name and ex.k == ex.sections.k


@pytest.mark.parametrize("name,params", [
    ("particle", {"m": -1.0}),
    ("snakeboard", {"J": 2.0}),
    ("chaplygin_ball", {"r": -0.1}),
    ("chaplygin_ball", {"I2": 0.0}),
    ("solid_of_revolution", {"gravity": -9.81}),
    ("particle", {"mass": 1.0}),
    ("pendulum", {}),
])
def test_parameter_errors(name, params):
    with pytest.raises(ParameterError):
        build_example(name, params)


def test_overrides_apply():
    ex = build_example("chaplygin_ball", {"r": 0.5})
    assert ex.oracles["mr2"] == pytest.approx(0.25)


def test_particle_distribution_and_lagrangian(examples, rng):
    sysm = examples["particle"].system
    q = sysm.sample_q(rng)
    E = sysm.chart.frame(q)
    assert np.allclose(E[:, 0], [1.0, 0.0, q[1]]) and np.allclose(E[:, 1], [0.0, 1.0, 0.0])
    assert np.allclose(sysm.metric(q), E.T @ E)


def test_snakeboard_constraint_forms(examples, rng):
    ex = examples["snakeboard"]
    r = ex.params["r"]
    for _ in range(5):
        s = ex.system.random_state(rng)
        th, ph = s.q[0], s.q[4]
        qdot = ex.system.chart.frame(s.q)[:, :3] @ velocity(ex.system, s)
        cot = math.cos(ph) / math.sin(ph)
        assert qdot[1] + r * math.cos(th) * cot * qdot[0] == pytest.approx(0.0, abs=1e-12)
        assert qdot[2] + r * math.sin(th) * cot * qdot[0] == pytest.approx(0.0, abs=1e-12)


def test_ball_rolling_constraints(examples, rng):
    ex = examples["chaplygin_ball"]
    r = ex.params["r"]
    for _ in range(5):
        s = ex.system.random_state(rng)
        al, be = s.q[0:3], s.q[3:6]
        Om = ex.oracles["omega"](s.q, s.pD)
        qdot = ex.system.chart.frame(s.q)[:, :3] @ velocity(ex.system, s)
        assert qdot[9] == pytest.approx(r * be @ Om, abs=1e-12)
        assert qdot[10] == pytest.approx(-r * al @ Om, abs=1e-12)


def test_solid_axisymmetric_inertia(examples):
    II = examples["solid_of_revolution"].oracles["inertia"]
    assert II[0, 0] == II[1, 1] and np.count_nonzero(II - np.diag(np.diag(II))) == 0


def test_ball_inertia_diagonal(examples):
    II = examples["chaplygin_ball"].oracles["inertia"]
    assert np.array_equal(II, np.diag([1.0, 2.0, 3.0]))


def test_snakeboard_E_closed_form(examples):
    ex = examples["snakeboard"]
    E = ex.extras["E_quadrature"]
    assert E(math.pi / 2) == pytest.approx(1.0)
    for phi in np.linspace(0.3, math.pi - 0.3, 9):
        assert E(phi) == pytest.approx(ex.oracles["E"](phi), rel=1e-12)


@given(st.floats(-0.99, 0.99), st.floats(0, 2 * math.pi), st.floats(0.3, 2.0), st.floats(0.3, 2.0))
def test_spheroid_contact_point(g3, th, a, c):
    """The contact point lies on the spheroid and its outward normal is -gamma."""
    rho, zet = spheroid_profile(a, c)
    s3 = math.sqrt(1 - g3 * g3)
    gam = np.array([s3 * math.cos(th), s3 * math.sin(th), g3])
    s = np.array([rho(g3) * gam[0], rho(g3) * gam[1], zet(g3)])
    assert (s[0] ** 2 + s[1] ** 2) / a ** 2 + s[2] ** 2 / c ** 2 == pytest.approx(1.0)
    n = np.array([s[0] / a ** 2, s[1] / a ** 2, s[2] / c ** 2])
    n /= np.linalg.norm(n)
    assert np.allclose(n, -gam, atol=1e-12)


def test_complex_safe_systems(examples):
    for name in ("chaplygin_ball", "solid_of_revolution"):
        sysm = examples[name].system
        assert sysm.complex_safe
        q = examples[name].trajectory_state().q.astype(complex)
        q[8] += 1e-30j
        assert np.iscomplexobj(sysm.chart.frame(q))
