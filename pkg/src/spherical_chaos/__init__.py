"""Disorder chaos for spherical mixed even-spin glasses: variational solver, chaos certificate and simulation."""

__version__ = "0.1.0"
