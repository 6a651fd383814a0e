"""Numerical estimation of asymptotic critical values, Milnor-set escapes,
and bifurcation behavior of polynomial mappings f: R^n -> R^p (n > p)."""

__version__ = "0.1.0"

from .polymap import (  # noqa: F401
    ChartMap,
    ComplexPolyMap,
    JacobianEval,
    MapFileError,
    PolyMap,
    Polynomial,
    chart_for_direction,
    chart_partials,
    eval_map,
    jacobian_eval,
    map_hash,
    parse_map,
    partial,
    realify,
)
from .regfuncs import (  # noqa: F401
    UNBOUNDED,
    RegularityPanel,
    gaffney_ratio,
    kos_indicator,
    kuo_kappa,
    malgrange_indicator,
    panel,
    rabier_nu,
)
from .infinity import (  # noqa: F401
    MilnorResidualEval,
    PointAtInfinity,
    RhoSpec,
    milnor_residual,
    sing_minors,
    singular_values_estimate,
    t_gap,
)
from .sampling import ConfigError, ScanConfig, ValueCluster, Witness, cluster_values  # noqa: F401
from .scanner import (  # noqa: F401
    CurveDescentReport,
    CurveTemplate,
    InclusionReport,
    curve_descent,
    inclusion_report,
    kos_scan,
    milnor_scan,
    t_probe,
)
from .fiberprobe import FiberCensus, atypical_witness, fiber_components_2d  # noqa: F401
