"""
parityarray - Simulation toolkit for parity-protected interferometer-array qubits
"""

__version__ = "0.1.0"
