"""Simulated and simulated-quantum annealing for Ising spin glasses, with
exact small-system checks of the underlying quantum annealing theory."""

__version__ = "0.1.0"
