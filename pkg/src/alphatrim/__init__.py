"""Alpha-trimmings of empirical measures and the central regions they induce."""

from .families import CATALOG, FunctionFamily, Member, clipped_family, make_family
from .lp import BoundedLp, LpError, LpResult, feasible, solve_max
from .measure import (
    DensityFn,
    DiscreteMeasure,
    IndexSetError,
    TrimmingError,
    empirical_measure,
    in_index_set,
    rn_reweight,
    sequential_update,
    transport_distance,
    trim_membership,
)
from .regions import (
    MEAN,
    LocationEstimate,
    SupportRegion,
    direction_grid,
    hausdorff_distance,
    integral_membership,
    integral_region_mask,
    location_region,
    zonoid_membership,
    zonoid_region,
    zonoid_support,
)

__version__ = "0.1.0"
