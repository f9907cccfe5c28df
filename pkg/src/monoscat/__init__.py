"""Forward simulation and monotonicity-based reconstruction for 2D inverse medium scattering."""

__version__ = "0.1.0"
