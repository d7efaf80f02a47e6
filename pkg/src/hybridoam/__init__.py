"""Simulation of a hybrid polarization/OAM single-photon platform.

Modules: ``modes`` (mode space and kets), ``elements`` (waveplates, q-plates,
analysers), ``fock2`` (two-photon beam-splitter interference and HOM
estimators), ``gate`` (post-selected entangling gate and CHSH), ``tomo``
(tomography), ``budget`` (efficiency chain) and ``cli``.
"""

from .errors import PhotonicsError
from .modes import DEFAULT_MAP, LogicalQubitMap, Mode, ModeSpace, SingleKet, basis_ket, inner, ket, parse_mode_label, to_logical

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_MAP",
    "LogicalQubitMap",
    "Mode",
    "ModeSpace",
    "PhotonicsError",
    "SingleKet",
    "basis_ket",
    "inner",
    "ket",
    "parse_mode_label",
    "to_logical",
]
