"""Constructive networks built on the elementary universal activation function."""

from .activation import EUAF, ActivationKind, euaf, triangle_wave
from .config import VERSION
from .network import Network, deserialize, serialize

__version__ = VERSION

__all__ = ["EUAF", "ActivationKind", "euaf", "triangle_wave", "Network", "serialize", "deserialize", "__version__"]
