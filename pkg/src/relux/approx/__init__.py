"""Approximation blocks and whole-network activation transforms."""
from .blocks import (IdentityBlock, SquareBlock, chain_length, identity_block, inverse_bound, inverse_chain,
                     max_abs_error, newman_coefficients, newman_precision, newman_rational_reference,
                     relu_from_activation_net, square_block)
from .catalog import (CATALOG_SPECS, N_MAX, RAMP_DELTA, ActivationSpec, ApproxReport, CertificateReport,
                      CertificateViolation, PrecisionError, certificate_check, get_activation,
                      normalized_derivatives, probe_grid)
from .relu_nets import (ActivationPlan, activation_plan, relu_activation_approx_net, relu_polynomial_net,
                        sawtooth_square_net, square_depth, taylor_degree)
from .transforms import (box_points, downstream_norms, plan_activation_to_relu, plan_relu_to_activation,
                         preactivation_bounds, transform_activation_to_relu, transform_relu_to_activation,
                         transform_budget)

__all__ = [n for n in dir() if not n.startswith("_")]
