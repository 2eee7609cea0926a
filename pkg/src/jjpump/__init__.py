"""Mean-field master-equation model of Josephson-junction networks and charge pumps."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    FluxSpec,
    ModelError,
    NetworkModel,
    PumpParams,
    build_asymmetric_pump,
    build_pump,
    build_symmetric_pump,
    load_model,
    validate,
)
from .dynamics import MDMState, evolve, mdm_derivative, relax_to_steady  # noqa: E402
from .steady import (  # noqa: E402
    FixedPointConfig,
    SteadyStateResult,
    fixed_point_iterate,
    multi_start,
    solve_linear_ec0,
    solve_steady,
)
from .observables import current_report, pump_current, terminal_currents  # noqa: E402

__all__ = [
    "__version__",
    "FluxSpec",
    "ModelError",
    "NetworkModel",
    "PumpParams",
    "build_asymmetric_pump",
    "build_pump",
    "build_symmetric_pump",
    "load_model",
    "validate",
    "MDMState",
    "evolve",
    "mdm_derivative",
    "relax_to_steady",
    "FixedPointConfig",
    "SteadyStateResult",
    "fixed_point_iterate",
    "multi_start",
    "solve_linear_ec0",
    "solve_steady",
    "current_report",
    "pump_current",
    "terminal_currents",
]
