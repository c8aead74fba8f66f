"""Certified robustness bounds for dense feed-forward networks.

Backward linear (and last-layer quadratic) relaxation of relu/tanh/sigmoid/
arctan networks, closed over lp balls by dual norms, with a binary search for
the largest certifiable radius.
"""

from ._version import __version__
from .model import (Activation, LabeledPoint, Layer, Network, NetworkFormatError,
                    act_value, forward, load_network, load_points, margin_network,
                    save_network)
from .relaxation import (LayerRelaxation, NeuronRelaxation, ReluLowerStrategy, Segment,
                         TangentSide, activation_eval, build_layer_relaxation,
                         relu_quadratic_lower, relu_relaxation, segment,
                         sshaped_relaxation, tangent_point_search)
from .propagation import (BallSpec, BoundingPlanes, LayerBounds, backward_plane,
                          global_bounds, layer_sweep, output_bounds, row_dual_norms)
from .certify import (CertificationResult, Method, MethodCompatibilityError, SearchConfig,
                      TargetMode, UntargetedResult, certify_margin, check_method,
                      radius_targeted, radius_untargeted, select_target)
from .quad import (Box, PgdConfig, PgdResult, QuadraticForm, Sense, build_quadratic,
                   crown_quad_margin, pgd_optimize, quad_output_bounds)
from .oracles import (FalsifierReport, falsify, grid_exact_bounds, interval_bounds,
                      sample_ball)

__all__ = [
    "__version__",
    "Activation", "LabeledPoint", "Layer", "Network", "NetworkFormatError",
    "act_value", "forward", "load_network", "load_points", "margin_network", "save_network",
    "LayerRelaxation", "NeuronRelaxation", "ReluLowerStrategy", "Segment",
    "TangentSide", "activation_eval", "build_layer_relaxation",
    "relu_quadratic_lower", "relu_relaxation", "segment", "sshaped_relaxation",
    "tangent_point_search",
    "BallSpec", "BoundingPlanes", "LayerBounds", "backward_plane", "global_bounds",
    "layer_sweep", "output_bounds", "row_dual_norms",
    "CertificationResult", "Method", "MethodCompatibilityError", "SearchConfig",
    "TargetMode", "UntargetedResult", "certify_margin", "check_method",
    "radius_targeted", "radius_untargeted", "select_target",
    "Box", "PgdConfig", "PgdResult", "QuadraticForm", "Sense", "build_quadratic",
    "crown_quad_margin", "pgd_optimize", "quad_output_bounds",
    "FalsifierReport", "falsify", "grid_exact_bounds", "interval_bounds", "sample_ball",
]
