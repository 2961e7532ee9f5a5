"""Piecewise-continuous interval maps: distances, orbits, perturbations and
invariant measures."""

from .connections import (ConnectionReport, LipschitzEstimate, check_connections,
                          connection_radius, d_set, lipschitz_estimate)
from .critical import CritReport, RadiusCertificate, critical_census, critical_radius
from .errors import PCMError
from .expr import Jet, eval_jet, parse_expr, unparse
from .measures import (MeasureVector, UlamOperator, invariance_residual, stationary_measure,
                       ulam_operator)
from .metrics import (Bounds, FunctionOnInterval, KernelOptions, SupQuery, certified_sup,
                      chi_metric, comp_metric, dist_inf_metric)
from .pcmap import (HomeoSpec, IntervalPair, PCMap, branch_value, build_map, dump_map, eval_map,
                    hausdorff_interval, load_map, load_map_file, xi_deform)
from .perturb import RepairResult, perturb_breakpoint, random_neighbor, repair_connections
from .sequences import (CollapseReport, LimitEstimate, MapSequence, collapse_estimate,
                        limit_estimate, load_sequence, pairwise_comp)

__version__ = "0.1.0"
