"""Surface-code simulation on defective qubit lattices."""

from .errors import UncoverableStabilizerError, UnencodableChipError
from .lattice import Chip, DeviceId, check_encodable, generate_chip, reduced_distance
from .stabilizers import Stabilizer, StabilizerSet, build_stabilizer_set, verify_commutation

__version__ = "0.1.0"

__all__ = [
    "Chip",
    "DeviceId",
    "Stabilizer",
    "StabilizerSet",
    "UncoverableStabilizerError",
    "UnencodableChipError",
    "build_stabilizer_set",
    "check_encodable",
    "generate_chip",
    "reduced_distance",
    "verify_commutation",
]
