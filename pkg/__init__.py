"""
demuxlimit - resolution limits of spatial-mode demultiplexing under crosstalk

This package computes Fisher information, minimal resolvable distances and
maximum-likelihood estimation statistics for two incoherent point sources
measured by Hermite-Gauss mode sorting.
"""

__version__ = "0.1.0"
