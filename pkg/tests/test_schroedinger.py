import numpy as np
import pytest

from polarmfe import (BlowupError, EnvelopeField, EnvelopeSpec, IndexSet, MFEContext, ProjectionError, Trilinear,
                      compute_dispersion, enumerate_terms, initial_state, make_polarized_envelope, propagate,
                      solve_hierarchy)
from polarmfe.schroedinger import hierarchy_rhs, nls_rhs

from conftest import random_field, single_mode


@pytest.fixture(scope="module")
def linear(kg, grid):
    spec = kg.replace(T=Trilinear("zero"))
    disp = compute_dispersion(spec, 1)
    return spec, disp, MFEContext(spec, disp, grid, 1)


def test_nls_rhs_of_zero(ctx1, grid):
    assert nls_rhs(EnvelopeField.zeros(grid, 2), ctx1).max_norm() == 0.0


def test_nls_rhs_rejects_field_outside_range(ctx1, grid):
    f = EnvelopeField(grid, np.ones(grid.shape + (2,)) * ctx1.disp.Pperp[:, 0])
    with pytest.raises(ProjectionError):
        nls_rhs(f, ctx1)


def test_nls_nonlinearity_has_three_terms():
    terms = enumerate_terms(1, 0, IndexSet(1))
    assert [J for J, _ in terms] == [(-1, 1, 1), (1, -1, 1), (1, 1, -1)]


def test_nls_rhs_single_mode_linear_part(linear, grid):
    spec, disp, ctx = linear
    c = 0.3 - 0.1j
    y, k = single_mode(grid, c * disp.v)
    out = nls_rhs(y, ctx)
    expect = -0.5j * disp.H[0, 0] * k**2 * y.values
    np.testing.assert_allclose(out.values, expect, atol=1e-14)


def test_nls_rhs_matches_pointwise_formula(ctx1, p1):
    """Nonlinear part is P(T(y,y,ybar) + T(y,ybar,y) + T(ybar,y,y)) = 3 P(|y|^2 y) for cubic T."""
    lin = ctx1.spectral(p1.values, ctx1.schroedinger_symbol)
    y = p1.values
    nonlin = 3 * (np.abs(y) ** 2 * y) @ ctx1.disp.P.T
    np.testing.assert_allclose(nls_rhs(p1, ctx1).values, lin + nonlin, atol=1e-13)


def test_level_one_sum_has_nine_terms():
    assert len(enumerate_terms(1, 1, IndexSet(1))) == 9
    assert len(enumerate_terms(1, 1, IndexSet(3))) == 9


def test_level_two_contains_third_harmonic_coupling():
    terms = enumerate_terms(1, 2, IndexSet(3))
    assert ((3, -1, -1), (2, 0, 0)) in terms
    assert ((-1, 3, -1), (0, 2, 0)) in terms and ((-1, -1, 3), (0, 0, 2)) in terms


def test_level_two_rhs_uses_third_harmonic(ctx3, p3):
    """Removing the v_3^2 coupling from the level-2 forcing changes it by exactly P T(v_3^2, ybar, ybar) x 3."""
    state = initial_state(ctx3, p3)
    hier = state.hierarchy(ctx3)
    full = hierarchy_rhs(state, 2, ctx3, hier).values
    v32 = hier.v(3, 2)
    yb = np.conj(hier.y(0))
    coupling = 3 * (v32 * yb * yb) @ ctx3.disp.P.T
    assert np.max(np.abs(coupling)) > 1e-3
    # the source sum at level 2 contains the coupling term with its three placements
    S = hier.source(1, 2)
    others = sum(ctx3.trilinear(*[hier.v(j, l) for j, l in zip(J, L)])
                 for J, L in enumerate_terms(1, 2, ctx3.idx) if 3 not in J)
    np.testing.assert_allclose((S - others) @ ctx3.disp.P.T, coupling, atol=1e-13)
    assert np.all(np.isfinite(full))


def test_level_one_rhs_with_zero_data(ctx1, grid):
    state = initial_state(ctx1, EnvelopeField.zeros(grid, 2))
    assert hierarchy_rhs(state, 1, ctx1).max_norm() == 0.0
    with pytest.raises(ValueError):
        hierarchy_rhs(state, 2, ctx1)


@pytest.mark.parametrize("level", [0, 1, 2])
def test_rhs_is_triangular(ctx3, p3, level):
    rng = np.random.default_rng(level)
    (state,) = solve_hierarchy(ctx3, p3, [0.1], dtau=0.01)
    base = hierarchy_rhs(state, level, ctx3).values
    ys = list(state.y)
    for upper in range(level + 1, 4):
        ys[upper] = random_field(rng, ctx3.grid, 2).apply_matrix(ctx3.disp.P)
    perturbed = type(state)(state.tau, tuple(ys))
    np.testing.assert_array_equal(hierarchy_rhs(perturbed, level, ctx3).values, base)


def test_rhs_output_in_range_of_P(ctx3, p3):
    (state,) = solve_hierarchy(ctx3, p3, [0.2], dtau=0.01)
    for level in range(4):
        out = hierarchy_rhs(state, level, ctx3).values
        assert np.max(np.abs(out @ ctx3.disp.Pperp.T)) < 1e-10


def test_zero_data_stays_zero(ctx3, grid):
    (state,) = solve_hierarchy(ctx3, EnvelopeField.zeros(grid, 2), [0.5])
    assert all(y.max_norm() == 0.0 for y in state.y)


def test_initial_state(ctx3, p3):
    s = initial_state(ctx3, p3)
    assert s.tau == 0.0 and s.y[0] is p3
    assert all(y.max_norm() == 0 for y in s.y[1:])


def test_free_schroedinger_matches_exact_multiplier(linear, grid, kg):
    spec, disp, ctx = linear
    p = make_polarized_envelope(spec, disp, grid)
    (state,) = solve_hierarchy(ctx, p, [0.5])
    k = grid.wavenumbers[..., 0]
    exact = EnvelopeField.from_coefficients(grid, p.coefficients * np.exp(-0.5j * 0.5 * disp.H[0, 0] * k**2)[..., None])
    assert np.max(np.abs(state.y[0].values - exact.values)) < 1e-10
    assert state.y[0].l2_norm() == pytest.approx(p.l2_norm(), abs=1e-10)


def test_range_preserved_during_propagation(ctx3, p3):
    states = solve_hierarchy(ctx3, p3, [0.1, 0.3, 0.5])
    for s in states:
        for y in s.y:
            assert np.max(np.abs(y.values @ ctx3.disp.Pperp.T)) < 1e-9


def test_checkpoints_hit_exactly(ctx1, p1):
    s = propagate(initial_state(ctx1, p1), 0.5, 0.03, ctx1, checkpoints=[0.1, 0.25])
    assert s.checkpoints == (0.1, 0.25)
    assert s.at(0.25).tau == 0.25 and s.at(0.5) is s
    with pytest.raises(KeyError):
        s.at(0.2)
    # landing on 0.1 exactly matches a run that stops there
    direct = propagate(initial_state(ctx1, p1), 0.1, 0.03, ctx1)
    np.testing.assert_allclose(s.at(0.1).y[0].values, direct.y[0].values, atol=1e-15)


def test_backward_integration_returns(ctx1, p1):
    fwd = propagate(initial_state(ctx1, p1), 0.2, 0.0025, ctx1)
    back = propagate(fwd, 0.0, 0.0025, ctx1)
    assert np.max(np.abs(back.y[0].values - p1.values)) < 1e-9


def test_self_convergence_order(ctx1, p1):
    finals = []
    for dtau in (1 / 40, 1 / 80, 1 / 160, 1 / 320):
        (s,) = solve_hierarchy(ctx1, p1, [0.5], dtau=dtau)
        finals.append(np.stack([y.values for y in s.y]))
    diffs = [np.max(np.abs(finals[i] - finals[i + 1])) for i in range(3)]
    slopes = np.log2(np.array(diffs[:-1]) / diffs[1:])
    assert np.all(slopes >= 3.5), slopes


def test_unit_gaussian_blows_up(kg, grid):
    spec = kg.replace(envelope=EnvelopeSpec("gaussian", amplitude=1.0))
    disp = compute_dispersion(spec, 1)
    ctx = MFEContext(spec, disp, grid, 1)
    p = make_polarized_envelope(spec, disp, grid)
    with pytest.raises(BlowupError):
        solve_hierarchy(ctx, p, [0.5])
