"""Gate-count and pulse-time complexity of random multi-qudit states and unitaries."""

__version__ = "0.1.0"

from .qcore import (
    StateVector,
    SystemDescriptor,
    UnitaryMatrix,
    embed_two_qudit,
    state_fidelity,
    unitary_fidelity,
)

__all__ = [
    "StateVector",
    "SystemDescriptor",
    "UnitaryMatrix",
    "embed_two_qudit",
    "state_fidelity",
    "unitary_fidelity",
    "__version__",
]
