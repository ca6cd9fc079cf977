import numpy as np
import pytest
from hypothesis import settings

from polarmfe import GridSpec, MFEContext, builtin_klein_gordon, compute_dispersion, make_polarized_envelope

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def kg():
    return builtin_klein_gordon()


@pytest.fixture(scope="session")
def grid():
    return GridSpec.default()


@pytest.fixture(scope="session")
def disp1(kg):
    return compute_dispersion(kg, 1)


@pytest.fixture(scope="session")
def disp3(kg):
    return compute_dispersion(kg, 3)


@pytest.fixture(scope="session")
def ctx1(kg, disp1, grid):
    return MFEContext(kg, disp1, grid, 1)


@pytest.fixture(scope="session")
def ctx3(kg, disp3, grid):
    return MFEContext(kg, disp3, grid, 3)


@pytest.fixture(scope="session")
def p1(kg, disp1, grid):
    return make_polarized_envelope(kg, disp1, grid)


@pytest.fixture(scope="session")
def p3(kg, disp3, grid):
    return make_polarized_envelope(kg, disp3, grid)


def random_field(rng, grid, n, modes=8):
    """Smooth random field with a handful of low Fourier modes."""
    c = np.zeros(grid.shape + (n,), complex)
    idx = tuple(slice(None) for _ in range(grid.d))
    sl = tuple(np.r_[0:modes, -modes:0] for _ in range(grid.d))
    sub = rng.standard_normal((2 * modes,) * grid.d + (n,)) + 1j * rng.standard_normal((2 * modes,) * grid.d + (n,))
    c[np.ix_(*sl)] = sub
    from polarmfe import EnvelopeField
    return EnvelopeField.from_coefficients(grid, c / (2 * modes) ** grid.d)


def single_mode(grid, w, k=1):
    """``exp(i k xi) w`` on a 1-d grid (k in units of the fundamental 2 pi / L)."""
    from polarmfe import EnvelopeField
    (x,) = grid.coordinates()
    kk = 2 * np.pi * k / grid.L[0]
    return EnvelopeField(grid, np.exp(1j * kk * x)[..., None] * np.asarray(w, complex)), kk
