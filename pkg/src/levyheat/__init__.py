"""levyheat: transition densities for stable-driven SDEs.

Constructs the heat kernel of L = a(x) L^(alpha) + b(x) d/dx by the
parametrix series, verifies the bound/consistency properties of the
construction numerically, and cross-validates against Euler simulation of
the driven SDE.
"""

from .kernels import (
    StableProfile, HullFunction, UnsupportedDimensionError,
    build_profile, eval_kernel, hull_value, save_profile, load_profile,
)
from .expressions import Expression, ExpressionError
from .coefficients import (
    CoefficientModel, FlowSolver, EllipticityError, RegimeError,
    parse_coefficients, flow_forward, flow_backward, flow_jacobian,
)

__version__ = "0.1.0"
