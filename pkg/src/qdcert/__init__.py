"""Finite-rank quasidiagonality certificates for central characters of U_d."""

__version__ = "0.1.0"
