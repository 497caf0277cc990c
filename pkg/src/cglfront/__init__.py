"""Numerical laboratory for traveling oscillating fronts in complex
Ginzburg-Landau equations: front profiles, spectra of the linearization in
exponentially weighted spaces, and nonlinear stability experiments."""

__version__ = "0.1.0"
