"""Domain types, evaluation, exact region analysis and serialization."""
from .builder import Lin, NetBuilder, compose, identity_pair
from .cells import (Cell2D, CellBudgetExceeded, adjacent_pairs, cell_decomposition_2d,
                    decompose_cells, merge_cells, polygon_area, split_polygon)
from .network import (ACTIVATIONS, CATALOG, AffineLayer, DimensionError, Network,
                      NetworkFormatError, eval_batch, eval_network, load_network, make_network,
                      network_from_json, network_to_json, save_network)
from .pwl import (Pwl1D, RegionReport, count_regions_1d, exact_l1_distance_1d, load_pwl,
                  monotone_runs, network_to_pwl1d, propagate_1d, pwl1d_region_report,
                  pwl_from_json, pwl_to_json, save_pwl)
from .reduce import (ReductionFailed, count_regions, project_output, reduce_output_dim,
                     region_report, sampled_region_lower_bound)
from .scalars import BINARY64, MPFR, RATIONAL, ModeError, coerce, to_fraction

__all__ = [n for n in dir() if not n.startswith("_")]
