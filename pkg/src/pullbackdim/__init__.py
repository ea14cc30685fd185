"""Numerical toolkit for a stochastic delayed reaction-diffusion equation.

Simulates the pathwise-transformed random equation by spectral Galerkin with
an exact-grid delay buffer, computes the spectral decomposition and dichotomy
constants of the linear part, samples the random pullback attractor, audits
the squeezing estimates, and evaluates the closed-form upper bound on the
attractor's Hausdorff dimension together with box-counting/correlation
dimension proxies.
"""

from .attractor import (
    PointCloud,
    SqueezeReport,
    estimate_absorbing_radius,
    hausdorff_distance,
    load_cloud,
    pullback_sample,
    save_cloud,
    verify_squeezing,
)
from .bound import (
    BoundInputs,
    BoundReport,
    ConditionCheck,
    ErgodicAverages,
    check_condition,
    ergodic_averages,
    hausdorff_bound,
    lipschitz_majorant,
    pathwise_majorant_integrals,
)
from .errors import (
    BlowupError,
    ConfigError,
    ConsistencyError,
    NumericalError,
    RootConvergenceError,
)
from .geometry import (
    CoverResult,
    DimensionEstimate,
    box_dimension,
    correlation_dimension,
    covering_bound,
    grid_cover,
)
from .noise import (
    NoiseField,
    OUProcessPath,
    TemperednessReport,
    WienerPath,
    make_noise_field,
    ou_path,
    sample_wiener,
    temperedness_check,
)
from .segments import HistorySegment, random_segment, zero_segment
from .solver import (
    LipschitzCheck,
    ModelConfig,
    Trajectory,
    evolve_rds,
    integrate_v,
    lipschitz_majorant_check,
    noise_for,
)
from .spectral import (
    CharacteristicRoot,
    LaplacianSpectrum,
    RootSet,
    SpectralModel,
    build_model,
    characteristic_roots,
    count_roots_in_rectangle,
    lambert_w,
    laplacian_spectrum,
    project_P,
    project_Q,
    semigroup_S,
)

__version__ = "0.1.0"
