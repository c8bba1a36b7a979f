"""Simulator for cavity-mediated geometric phase gates on quantum-dot spin qubits."""

__version__ = "0.1.0"
