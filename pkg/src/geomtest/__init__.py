"""Graph-based multivariate two-sample testing on stabilizing geometric
graphs (directed K-NN, symmetrized Euclidean MST), with Poissonized
sampling, Monte Carlo estimation of the calibration constants, and an
experiment harness for local-power studies."""

__version__ = "0.1.0"

from .constants import (
    FunctionalConstants,
    TailEstimate,
    estimate_constants,
    find_constants,
    joint_degree_covariance,
    load_constants_csv,
    moment_check_cd,
    save_constants_csv,
    stabilization_tail,
    unit_ball_volume,
)
from .errors import (
    GeomtestError,
    GridTooCoarseError,
    IncompleteConstantsError,
    InsufficientPilotError,
    InvalidInputError,
    InvalidParameterError,
    NumericalError,
    ResourceLimitError,
)
from .experiments import (
    CltReport,
    LocalPowerReport,
    PowerCurve,
    clt_diagnostic,
    critical_exponents,
    hotelling_t2,
    local_power_crosscheck,
    power_curve,
    theoretical_local_power,
    write_clt_csv,
    write_local_power_csv,
    write_power_csv,
    write_power_svg,
)
from .functional import GraphKind, LocalStats, edge_count, local_stats
from .geom import (
    DirectedGeometricGraph,
    PointCloud,
    emst,
    knn_graph,
    knn_graph_brute,
    kth_nn_distance,
    load_point_csv,
    save_point_csv,
    validate_graph,
)
from .mcutil import MCEstimate
from .sampling import (
    Density,
    LabeledSample,
    SeededRng,
    gaussian,
    load_labeled_csv,
    sample_poisson_torus,
    sample_poissonized_pair,
    sample_pooled_labeled,
    sample_truncated_normal,
    save_labeled_csv,
    truncated_normal,
    uniform_box,
)
from .stats import (
    TestReport,
    VarianceBreakdown,
    asymptotic_test,
    conditional_cross_mean,
    cross_count,
    hp_dissimilarity,
    label_probability,
    null_edge_count,
    permutation_test,
    sigma1_alternative,
    sigma1_null,
    sigma2_knn,
    sigma_null_sq,
    sigma_total_knn,
    weak_limit,
)
