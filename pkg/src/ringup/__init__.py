"""Transmon-resonator ring-up: eigenladders, leakage, shearing and dressed squeezed states."""

__version__ = "0.1.0"

from .model import DriveEnvelope, SystemParams  # noqa: E402
from .spectrum import DressedBasis, LadderProfile, diagonalize  # noqa: E402

__all__ = ["DriveEnvelope", "DressedBasis", "LadderProfile", "SystemParams", "diagonalize", "__version__"]
