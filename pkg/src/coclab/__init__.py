"""coclab: a numerical laboratory for SL(2,R) cocycles over torus maps."""

from .classify import (
    ClassificationVerdict,
    DominationReport,
    EstimateSettings,
    HyperbolicitySettings,
    Inconclusive,
    PeriodicPointType,
    SimpleNonuniform,
    TrivialSpectrum,
    UniformlyHyperbolic,
    domination_check,
    elliptic_classify,
    holder_seminorm,
    spectrum_class,
    uniform_hyperbolicity_test,
)
from .cocycles import (
    ConstantCocycle,
    Cocycle,
    CosinePotential,
    DerivativeCocycle,
    DiagonalBoostCocycle,
    InverseCocycle,
    PiecewisePerturbedCocycle,
    PointwiseRotatedCocycle,
    ScaledProduct,
    SchrodingerCocycle,
    ZeroPotential,
    backward_window_product,
    derivative_cocycle,
    iterate,
    product_defect,
    sup_distance,
)
from .conjugacy import (
    ConjugacyMap,
    compute_conjugacy,
    holder_exponent_estimate,
    transport_cocycle,
    transported_exponent_pullback,
    transported_seminorm_check,
    verify_transport_identity,
)
from .experiments import (
    ExperimentConfig,
    ExperimentResult,
    PerturbationEpsScan,
    SchrodingerEnergyScan,
    SearchSettings,
    StandardMapKScan,
    exponent_lowering_search,
    parameter_scan,
    semicontinuity_probe,
    simple_spectrum_search,
)
from .lyapunov import (
    LAMBDA_MIN,
    IntegratedExponent,
    LebesgueSpec,
    LyapunovEstimate,
    PeriodicEquidistributionSpec,
    SingleOrbitSpec,
    integrated_exponent,
    mme_spec,
    oseledets_directions,
    top_exponent,
)
from .matrices import Mat2
from .torus import (
    InvertedMap,
    LinearToral,
    PerturbedToral,
    Rotation,
    StandardMap,
    TorusPoint,
    check_measure_preservation,
    distance,
    hyperbolicity_rate,
    orbit,
    periodic_points,
)

__version__ = "0.1.0"
