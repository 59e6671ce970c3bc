"""Scenario-based SOTIF validation: triggering conditions as scenario constraints,
constrained test matrices, a longitudinal AEB simulation and TC classification."""

__version__ = "0.1.0"
