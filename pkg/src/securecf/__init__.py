"""Secure compute-and-forward over a two-way Gaussian relay: finite-field codes,
hashing, channel information quantities, leakage bounds and protocol simulation."""

from . import bounds, channel, codes, galois, infoq, protocol

__all__ = ["bounds", "channel", "codes", "galois", "infoq", "protocol"]
__version__ = "0.1.0"
