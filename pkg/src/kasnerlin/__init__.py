"""Linearized Einstein-scalar perturbations of Kasner backgrounds on T^3."""

__version__ = "0.1.0"
