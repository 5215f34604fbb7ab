"""Radial solutions of the fourth-order total variation flow."""
from . import ball_dynamics, calibration, oracle, radial_core, stack_dynamics
from .calibration import compute_qstar
from .errors import (
    BendingError,
    DomainError,
    IntegrationError,
    NotCalibrableError,
    RangeError,
    SingularityError,
    TVFlowError,
    UnsupportedDomainError,
)

__all__ = [
    "ball_dynamics",
    "calibration",
    "oracle",
    "radial_core",
    "stack_dynamics",
    "compute_qstar",
    "BendingError",
    "DomainError",
    "IntegrationError",
    "NotCalibrableError",
    "RangeError",
    "SingularityError",
    "TVFlowError",
    "UnsupportedDomainError",
]
