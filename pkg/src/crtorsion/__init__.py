"""crtorsion: zeta-regularized analytic torsion of Kohn Laplacian Fourier
components from spectral data, with the circle-bundle model built in."""

__version__ = "0.1.0"

from .density import (
    LeviSpectrum,
    WedgeDiagonalDensity,
    hatA_coeffs,
    model_density_coeffs,
    rt_density,
    rt_density_series,
    supertrace_N_density,
)
from .errors import (
    ArityError,
    CrTorsionError,
    DomainError,
    EmptyDegreeError,
    IllConditionedWarning,
    ParseError,
    QuadratureError,
    SingularLeadError,
    TwoPathMismatchError,
    UnsupportedTailError,
)
from .mellin import (
    EULER_GAMMA,
    GAMMA_PRIME_1,
    MellinInput,
    MellinResult,
    QuadratureConfig,
    mellin_at_zero,
    riemann_zeta_check,
)
from .series import (
    FitResult,
    HalfPowerSeries,
    bose_factor,
    fit_half_powers,
    series_arith,
)
from .spectra import (
    GeometryModel,
    SpectrumTable,
    TraceValue,
    cp1_geometry,
    cp1_spectrum,
    heat_supertrace_N,
    ingest_spectrum,
    load_geometry,
    spectral_gap,
    trace_degree,
)
from .strata import (
    StratumIntegrand,
    gaussian_stratum_expansion,
    stratum_suppression_envelope,
)
from .torsion import (
    TorsionReport,
    asympt_sweep,
    closed_form_bhat,
    extract_bhat,
    theta_prime_zero,
    theta_prime_zero_direct,
    torsion_rhs,
)

__all__ = [name for name in dir() if not name.startswith("_")]
