"""Desk-scale laboratory for affine unique games.

Sum-of-squares relaxations, pseudodistribution calculus, shift-partition
potentials, condition-and-round, and the Johnson-graph subcube pipeline,
with brute-force oracles and closed-form spectral identities throughout.
"""

from ugsos.errors import (
    UgsosError,
    ParameterError,
    SizeCapError,
    DegreeError,
    NullEventError,
    ConstructionError,
)
from ugsos.instances import UgInstance, value, local_value, brute_force_opt, plant_instance

__all__ = [
    "UgsosError",
    "ParameterError",
    "SizeCapError",
    "DegreeError",
    "NullEventError",
    "ConstructionError",
    "UgInstance",
    "value",
    "local_value",
    "brute_force_opt",
    "plant_instance",
]

__version__ = "0.1.0"
