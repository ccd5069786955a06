"""Construction, evolution and verification of exact ncIHF multi-soliton solutions."""

__version__ = "0.1.0"
