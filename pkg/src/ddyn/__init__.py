"""Dynamics of robots with lossy, direction-dependent transmissions."""

from .dissipative import DissipativeDynamics, assemble, conventional, forward_dynamics
from .errors import DdynError, ForwardLockedError, ModelError, NumericError, SingularError
from .flow import FlowDirection
from .metrics import Variant, efficiency_sweep, force_capability, git, imf
from .model_io import builtin_case_study, load_model, parse_model, serialize_model
from .redundant import simulate_redundant_system
from .rigid_body import PlanarBody, RobotModel, SystemState
from .transmission import EfficiencyMap, TransmissionSet
from .wedge import WedgeParams

__all__ = [
    "DdynError", "DissipativeDynamics", "EfficiencyMap", "FlowDirection", "ForwardLockedError",
    "ModelError", "NumericError", "PlanarBody", "RobotModel", "SingularError", "SystemState",
    "TransmissionSet", "Variant", "WedgeParams", "assemble", "builtin_case_study", "conventional",
    "efficiency_sweep", "force_capability", "forward_dynamics", "git", "imf", "load_model",
    "parse_model", "serialize_model", "simulate_redundant_system",
]
