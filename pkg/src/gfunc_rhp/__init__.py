"""Determinant-form solver for scalar g-function Riemann-Hilbert problems.

Modules: ``contour`` (paths, loops, quadrature), ``radical`` (the square-root
branch R), ``ffunction`` (jump functions f), ``rhpcore`` (D, K, h, g and
their derivatives), ``continuation`` (Newton, continuation, sign checks),
``validation`` (oracles and suites) and ``cli``.
"""

__version__ = "0.1.0"

from .contour import QuadratureSpec, build_loop, integrate  # noqa: E402
from .continuation import (  # noqa: E402
    ContinuationControls,
    NewtonOptions,
    continue_parameter,
    newton_solve,
    scan_initializer,
    sign_condition_check,
)
from .ffunction import NLSParameters, nls_f, nls_jump_function  # noqa: E402
from .rhpcore import (  # noqa: E402
    GeometryOptions,
    RHPSolution,
    build_configuration,
    dalpha_dbeta,
    eval_h,
    eval_K,
    jump_check,
)

__all__ = [
    "__version__",
    "QuadratureSpec",
    "build_loop",
    "integrate",
    "ContinuationControls",
    "NewtonOptions",
    "continue_parameter",
    "newton_solve",
    "scan_initializer",
    "sign_condition_check",
    "NLSParameters",
    "nls_f",
    "nls_jump_function",
    "GeometryOptions",
    "RHPSolution",
    "build_configuration",
    "dalpha_dbeta",
    "eval_h",
    "eval_K",
    "jump_check",
]
