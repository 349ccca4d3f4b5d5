"""Click-counting statistics of multiplexed detectors and nonclassicality tests."""

from __future__ import annotations

__version__ = "0.1.0"

from .criteria import (
    CriterionResult,
    WitnessVector,
    bootstrap,
    evaluate,
    full_matrix_test,
    mu_statistics,
    projected_criterion,
    q_bin,
    q_multi,
    q_pois,
)
from .engine import (
    ClickDistribution,
    CountsTable,
    HeraldedCounts,
    MultiplexConfig,
    click_distribution,
    click_distribution_classical,
    click_distribution_fock_exact,
    enumerate_occupations,
    occupation_of_outcomes,
    sample_clicks,
    sample_heralded,
    total_variation,
)
from .errors import (
    ClickStatsError,
    DegenerateError,
    DomainError,
    FitError,
    ParseError,
    SizeError,
    TruncationError,
    ValidationError,
)
from .ingest import (
    BinningSpec,
    CalibrationFit,
    asymmetry_report,
    bin_samples,
    coincidences_from_readings,
    fit_quadratic_calibration,
    load_coincidences,
    load_heralded,
    save_counts,
)
from .jacobi import jacobi_eigh, min_eig_sym
from .moments import (
    MomentMatrix2,
    covariance_matrix,
    factorial_moment,
    higher_moment_matrix,
    normal_moment,
)
from .oracle import OracleParams, eta_gen_theory, gf_derivative, heralded_mu_theory, oracle_table
from .response import ResponseMatrix, custom_response, onoff_response, photoelectric_response
from .states import (
    ClassicalMixture,
    PhotonDistribution,
    TMSVParams,
    coherent_distribution,
    fock_distribution,
    heralded_tmsv_distribution,
    thermal_distribution,
)
