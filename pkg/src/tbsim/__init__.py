"""Quantum-dot time-bin entanglement experiment simulator and analysis toolkit."""

__version__ = "0.1.0"
