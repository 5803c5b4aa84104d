"""Quantum-kernel SVMs for just-in-time defect prediction, with chunked ensembles."""

__version__ = "0.1.0"
