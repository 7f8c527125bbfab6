"""Kernel-adaptive MCMC with darting moves for sampling grasp poses."""

__version__ = "0.1.0"
