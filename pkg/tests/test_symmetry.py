import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nhreduce.geometry import FrameChart
from nhreduce.integrate import integrate
from nhreduce.symmetry import (
    GroupData,
    IllPosedMomentumODEError,
    MissingGroupSampleError,
    SectionBasis,
    assemble_momentum_ode,
    chebyshev_surrogate,
    check_Ad_invariance,
    conservation_drift,
    gauge_momenta,
    group_samples,
    nh_momentum,
    section_S_residual,
    solve_momentum_ode,
    verify_dimension_assumption,
    vertical_symmetry_residual,
)
from nhreduce.system import NonholonomicSystem, hamiltonian_M


def degenerate_system():
    # D = V = span{d_x} on R^2: D + V misses d_y
    chart = FrameChart(dim_q=2, coordinate_names=["x", "y"], domain_predicate=lambda q: True,
                       frame=lambda q: np.eye(2), rank_D=1, rank_S=1)
    grp = GroupData(dim_g=1, generators=lambda q: np.array([[1.0], [0.0]]),
                    structure_constants=np.zeros((1, 1, 1)), w_indices=())
    return NonholonomicSystem(chart=chart, metric=lambda q: np.eye(2), action=grp)


def test_dimension_assumption(examples, rng):
    for name, rank in (("particle", 1), ("snakeboard", 2), ("chaplygin_ball", 1),
                       ("solid_of_revolution", 2)):
        sysm = examples[name].system
        rep = verify_dimension_assumption(sysm, sysm.sample_q(rng))
        assert rep.holds and rep.rank_S == rank
    assert not verify_dimension_assumption(degenerate_system(), np.zeros(2)).holds


def test_vertical_symmetry_and_sections(examples, rng):
    for ex in examples.values():
        q = ex.system.sample_q(rng)
        assert vertical_symmetry_residual(ex.system, q) < 1e-12
        assert section_S_residual(ex.system, ex.sections, q) < 1e-9


def test_particle_gauge_momentum(examples, rng):
    ex = examples["particle"]
    for _ in range(5):
        s = ex.system.random_state(rng)
        assert gauge_momenta(ex.system, ex.sections, s)[0] == pytest.approx(
            s.pD[0] / math.sqrt(1 + s.q[1] ** 2), rel=1e-12)
    assert nh_momentum(ex.system, s, lambda q: np.zeros(2)) == 0.0


def test_ball_gauge_momentum_is_gamma_M(examples, rng):
    ex = examples["chaplygin_ball"]
    for _ in range(5):
        s = ex.system.random_state(rng)
        assert gauge_momenta(ex.system, ex.sections, s)[0] == pytest.approx(ex.oracles["J"](s.q, s.pD))


def test_snakeboard_gauge_momenta(examples, rng):
    ex = examples["snakeboard"]
    s = ex.system.random_state(rng)
    J = gauge_momenta(ex.system, ex.sections, s)
    assert J[0] == pytest.approx(ex.oracles["J1"](s.q, s.pD), rel=1e-10)
    assert J[1] == pytest.approx(ex.oracles["J2"](s.q, s.pD))


def test_Ad_invariance(examples, rng):
    for name, tol in (("particle", 1e-9), ("snakeboard", 1e-8), ("chaplygin_ball", 1e-8)):
        ex = examples[name]
        samples = group_samples(ex.system, rng, 10)
        for sec in ex.sections.sections:
            assert check_Ad_invariance(ex.system, sec, samples) < tol


def test_Ad_trivial_on_center(examples, rng):
    ex = examples["snakeboard"]
    # beta direction (fourth generator) is central in SE(2) x R
    centre = lambda q: np.array([0.0, 0.0, 0.0, 1.0])
    assert check_Ad_invariance(ex.system, centre, group_samples(ex.system, rng, 5)) < 1e-9


def test_missing_group_sampler():
    with pytest.raises(MissingGroupSampleError):
        group_samples(degenerate_system(), np.random.default_rng(0), 1)


def test_drift_helpers(examples):
    ex = examples["snakeboard"]
    tr = integrate(ex.system, ex.trajectory_state(), 1e-2, 1.0)
    assert conservation_drift(tr.states, lambda s: 3.0).max_abs_drift == 0.0
    assert conservation_drift(tr.states, lambda s: s.pD[1]).max_rel_drift < 1e-8
    assert conservation_drift(tr.states, lambda s: hamiltonian_M(ex.system, s)).max_rel_drift < 1e-8
    with pytest.raises(ValueError):
        conservation_drift([], lambda s: 0.0)


def test_particle_momentum_ode(examples):
    ex = examples["particle"]
    st_ = ex.momentum_ode
    A = assemble_momentum_ode(ex.system, st_.xi_basis, st_.shape, st_.probe_point)
    ys = np.linspace(-2, 2, 17)
    assert max(abs(A(y)[0, 0] + y / (1 + y * y)) for y in ys) < 1e-6
    F = solve_momentum_ode(A, st_.gamma_range, gamma0=0.5)
    assert max(abs(F(y)[0, 0] - ex.oracles["momentum_F"](y, 0.5)) for y in ys) < 1e-8


def test_snakeboard_momentum_ode(examples):
    ex = examples["snakeboard"]
    st_ = ex.momentum_ode
    A = assemble_momentum_ode(ex.system, st_.xi_basis, st_.shape, st_.probe_point)
    phis = np.linspace(*st_.gamma_range, 15)
    assert max(abs(A(p)[0, 0] - ex.oracles["momentum_A"](p)) for p in phis) < 1e-6
    F = solve_momentum_ode(A, st_.gamma_range, gamma0=st_.gamma0)
    E = ex.extras["E_quadrature"]
    assert max(abs(F(p)[0, 0] - E(p) / E(st_.gamma0)) for p in phis) < 1e-8
    assert max(abs(E(p) - ex.oracles["E"](p)) for p in phis) < 1e-12


def test_solid_momentum_ode_well_posed(examples):
    A = examples["solid_of_revolution"].oracles["momentum_A"]
    for g in np.linspace(-0.9, 0.9, 7):
        assert A(g).shape == (2, 2)
        assert A.last_residual < 1e-6


def test_zero_A_gives_constant_solution():
    init = np.array([[2.0, 1.0], [0.0, 1.0]])
    F = solve_momentum_ode(lambda g: np.zeros((2, 2)), (0.0, 1.0), init=init)
    assert np.allclose(F(0.37), init)


def test_singular_init_rejected():
    with pytest.raises(ValueError):
        solve_momentum_ode(lambda g: np.zeros((1, 1)), (0.0, 1.0), init=np.zeros((1, 1)))


def test_ill_posed_probe_system(examples):
    # shape x cannot carry the y-dependence of the particle momentum: probes disagree
    ex = examples["particle"]
    st_ = ex.momentum_ode
    A = assemble_momentum_ode(ex.system, st_.xi_basis, lambda q: q[0],
                              lambda x: np.array([x, 0.7, 0.0]))
    with pytest.raises(IllPosedMomentumODEError):
        A(0.3)


@settings(max_examples=20, deadline=None)
@given(st.floats(-1.0, 1.0), st.floats(-1.0, 1.0))
def test_solution_matches_exponential(a, b):
    """Constant A: F(g) = expm(A (g - g0))."""
    from scipy.linalg import expm
    A0 = np.array([[a, b], [-b, 0.5 * a]])
    F = solve_momentum_ode(lambda g: A0, (0.0, 1.0), gamma0=0.0, nodes=201)
    assert np.allclose(F(0.8), expm(0.8 * A0), atol=1e-8)


def test_chebyshev_surrogate_accuracy():
    A = lambda g: np.array([[math.sin(3 * g), math.exp(g)]])
    sur, err = chebyshev_surrogate(A, (-1.0, 1.0), points=40)
    assert err < 1e-12
    assert np.allclose(sur(0.123), A(0.123), atol=1e-12)
