import numpy as np
import pytest
from hypothesis import given, strategies as st

from polarmfe import (AssumptionError, Branch, EnvelopeSpec, GridSpec, PeriodizationError, StructuralError,
                      SystemSpec, Trilinear, builtin_klein_gordon, compute_dispersion,
                      make_polarized_envelope, validate_system)
from polarmfe.dispersion import L_matrix, eigenpair
from polarmfe.errors import AdmissibilityError
from polarmfe.model import envelope_profile


def test_klein_gordon_passes_validation_for_m3(kg):
    report = validate_system(kg, m=3)
    assert report.passed
    sig = dict(report.sigma_min)
    # dense singular values of L_3, L_5 for comparison
    omega = np.sqrt(2.0)
    for j in (3, 5):
        Lj = -j * omega * np.eye(2) + np.array([[0, j], [j, 0]]) - 1j * np.array([[0, -1], [1, 0]])
        assert sig[j] == pytest.approx(np.linalg.svd(Lj, compute_uv=False)[-1], abs=1e-12)
        assert sig[j] > 0


def test_identity_E_is_not_skew(kg):
    with pytest.raises(StructuralError) as info:
        validate_system(kg.replace(E=np.eye(2)))
    assert info.value.matrix == "E"


def test_zero_wave_vector_rejected(kg):
    with pytest.raises(StructuralError):
        validate_system(kg.replace(kappa=[0.0]))
    with pytest.raises(StructuralError):
        builtin_klein_gordon(kappa=0.0)


def test_nonsymmetric_A_rejected(kg):
    with pytest.raises(StructuralError) as info:
        validate_system(kg.replace(A=[[[0.0, 1.0], [0.5, 0.0]]]))
    assert info.value.defect == pytest.approx(0.5)


def test_report_without_raising_lists_failures(kg):
    report = validate_system(kg.replace(E=np.eye(2)), raise_on_failure=False)
    assert not report.passed
    assert any(c.name == "E skew-symmetric" and not c.passed for c in report.checks)


def test_singular_L_j_raises_assumption_error():
    # n=1 system with E = 0: A(k) - iE = k, L_3 = -3k + 3k = 0
    spec = SystemSpec(A=[[[1.0]]], E=[[0.0]], kappa=[1.0])
    with pytest.raises(AssumptionError) as info:
        validate_system(spec, m=1)
    assert info.value.j == 3
    assert info.value.sigma_min < 1e-10


def test_validation_is_deterministic(kg):
    assert validate_system(kg, m=3) == validate_system(kg, m=3)


def test_klein_gordon_spectrum_at_zero(kg):
    lam = np.linalg.eigvalsh(np.zeros((2, 2)) - 1j * kg.E)
    np.testing.assert_allclose(np.sort(lam), [-1.0, 1.0], atol=1e-14)


def test_klein_gordon_eigenvector_at_one(kg):
    ep = eigenpair(kg, [1.0])
    assert ep.omega == pytest.approx(np.sqrt(2.0), abs=1e-12)
    ref = np.array([1 + 1j, np.sqrt(2.0)]) / 2
    assert abs(abs(np.vdot(ref, ep.v)) - 1.0) < 1e-12


@given(st.floats(-5, 5).filter(lambda k: abs(k) > 1e-3))
def test_klein_gordon_dispersion_relation(k):
    spec = builtin_klein_gordon(kappa=k)
    lam = np.linalg.eigvalsh(k * spec.A[0] - 1j * spec.E)
    np.testing.assert_allclose(np.sort(lam), [-np.sqrt(1 + k * k), np.sqrt(1 + k * k)], atol=1e-12)


def test_klein_gordon_structure(kg):
    assert kg.d == 1 and kg.n == 2
    np.testing.assert_array_equal(kg.A[0], [[0, 1], [1, 0]])
    np.testing.assert_array_equal(kg.E, [[0, -1], [1, 0]])
    u, v, w = np.array([1.0, 2.0]), np.array([3.0, -1.0]), np.array([0.5, 4.0])
    np.testing.assert_allclose(kg.T(u, v, w), u * v * w)


def test_epsilon_hint_checks_admissibility():
    builtin_klein_gordon(epsilon_hint=1 / 16)
    with pytest.raises(AdmissibilityError):
        builtin_klein_gordon(epsilon_hint=0.07)


def test_spec_arrays_are_read_only(kg):
    with pytest.raises(ValueError):
        kg.A[0, 0, 0] = 1.0


def test_spec_dict_round_trip(kg):
    spec = kg.replace(T=Trilinear("coupling", matrix=[[1.0, 0.5], [0.5, 2.0]]), branch=Branch(0, target=1.4),
                      envelope=EnvelopeSpec("gaussian", amplitude=0.3 + 0.1j, width=5.0, center=(40.0,)))
    back = SystemSpec.from_dict(spec.to_dict())
    assert back.to_dict() == spec.to_dict()


def test_custom_nonlinearity_not_serializable(kg):
    spec = kg.replace(T=Trilinear("custom", func=lambda f, g, h: f * g * h))
    with pytest.raises(ValueError):
        spec.to_dict()


def test_coupling_nonlinearity():
    M = np.array([[0.0, 1.0], [2.0, 0.0]])
    T = Trilinear("coupling", matrix=M)
    u, v, w = np.array([1.0, 2.0]), np.array([3.0, 1.0]), np.array([1.0, -1.0])
    np.testing.assert_allclose(T(u, v, w), 5.0 * (M @ w))


def test_zero_envelope_gives_zero_field(kg, disp1, grid):
    p = make_polarized_envelope(kg, disp1, grid, alpha=np.zeros(grid.shape))
    assert p.max_norm() == 0.0


def test_gaussian_envelope_is_collinear_with_v(kg, disp1, p1):
    v = disp1.v
    cross = p1.values[:, 0] * v[1] - p1.values[:, 1] * v[0]
    assert np.max(np.abs(cross)) < 1e-12
    assert np.max(np.abs(p1.values @ disp1.P.T - p1.values)) < 1e-12


def test_tabulated_envelope_matches_gaussian(kg, disp1, grid, p1):
    alpha = envelope_profile(kg.envelope, grid)
    spec = kg.replace(envelope=EnvelopeSpec("tabulated", samples=alpha))
    p = make_polarized_envelope(spec, disp1, grid)
    np.testing.assert_array_equal(p.values, p1.values)


def test_wide_envelope_raises_periodization_error(kg, disp1, grid):
    spec = kg.replace(envelope=EnvelopeSpec("gaussian", width=grid.L[0] / 4))
    with pytest.raises(PeriodizationError):
        make_polarized_envelope(spec, disp1, grid)


def test_default_envelope_decays_at_boundary(kg, grid):
    alpha = envelope_profile(kg.envelope, grid)
    assert abs(alpha[0]) < 1e-14


@pytest.mark.parametrize("j", [3, 5, 7, 9, 11])
def test_klein_gordon_nonresonance(kg, j):
    s = np.linalg.svd(L_matrix(kg, np.sqrt(2.0), j), compute_uv=False)[-1]
    assert s > 0.1


def _random_system(seed, n, d=1):
    rng = np.random.default_rng(seed)
    A = [(lambda X: X + X.T)(rng.standard_normal((n, n))) for _ in range(d)]
    S = rng.standard_normal((n, n))
    return SystemSpec(A=A, E=S - S.T, kappa=rng.standard_normal(d) + 0.5)


@given(st.integers(0, 10_000), st.integers(1, 6))
def test_polarized_envelope_in_range_of_P(seed, n):
    spec = _random_system(seed, n)
    try:
        disp = compute_dispersion(spec, 1)
    except AssumptionError:
        return
    grid = GridSpec((32 * np.pi,), (64,))
    p = make_polarized_envelope(spec, disp, grid)
    assert np.max(np.abs(p.values @ disp.P.T - p.values)) < 1e-12
