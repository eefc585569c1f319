"""Entanglement classification with segmented RBM neural-network states."""
__version__ = "0.1.0"
