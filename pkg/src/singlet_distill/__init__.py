"""Driving two fixed qubits into the singlet by repeated on- and
off-resonant scattering of ancilla qubits."""

from .channels import (Superoperator, average_fidelity, averaged_map, certify, channel_R,
                       channel_S, channel_T, detector_map, fixed_point, iterate, protocol_map,
                       superop_spectrum)
from .errors import (DistillError, FidelityFormulaError, InvalidStateError, NotMixingError,
                     NumericalFailure, ResonantShakingWarning)
from .scattering import PhysicalParams, ScatterPair, resonant_operators, scatter_operators
from .sector_model import SectorMatrix, fixed_fidelity, v_coefficient, w_coefficient

__version__ = "0.1.0"
