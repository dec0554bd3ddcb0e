"""Kernels, orthonormal polynomials and asymptotics for planar Gaussian ensembles."""

__version__ = "0.1.0"
