"""Superfluorescence of N two-level systems under local dephasing and loss."""

__version__ = "0.1.0"
