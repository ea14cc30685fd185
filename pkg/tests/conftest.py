import numpy as np
import pytest

from pullbackdim.solver import ModelConfig
from pullbackdim.spectral import build_model, laplacian_spectrum

# Desk-scale reference setup: 3 sine modes, mu=1, sigma=0.1, tau=0.5.
MU, SIGMA, TAU, N_MODES = 1.0, 0.1, 0.5, 3


@pytest.fixture(scope="session")
def model_cut1():
    """Spectral model with the cutoff at the leading root (mode-1 principal)."""
    return build_model(
        laplacian_spectrum(N_MODES), mu=MU, sigma=SIGMA, tau=TAU,
        cutoff_index=1, samples=200, n_tau=128, seed=0,
    )


@pytest.fixture(scope="session")
def model_cut2():
    """Spectral model with the cutoff below the mode-2 principal pair."""
    return build_model(
        laplacian_spectrum(N_MODES), mu=MU, sigma=SIGMA, tau=TAU,
        cutoff_index=2, samples=200, n_tau=128, seed=0,
    )


@pytest.fixture(scope="session")
def nonlinear_cfg():
    """Dissipative nonlinear configuration with two noise channels."""
    return ModelConfig(
        mu=MU, sigma=SIGMA, tau=TAU,
        F_coeffs=(0.5, 0.0, -1.0),
        f_kind="rational_saturation", f_lipschitz=0.1,
        g_coeffs=np.array([[0.08, 0.02, 0.0], [0.0, 0.05, 0.02]]),
        n_modes=N_MODES, h=0.025,
    )


@pytest.fixture(scope="session")
def linear_cfg():
    """Linear baseline: F = 0, f = 0, no noise."""
    return ModelConfig(
        mu=MU, sigma=SIGMA, tau=TAU, F_coeffs=(), f_kind="zero", f_lipschitz=0.0,
        g_coeffs=np.zeros((1, N_MODES)), n_modes=N_MODES, h=0.025,
    )
