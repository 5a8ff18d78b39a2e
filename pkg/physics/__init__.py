"""
Physics engines: mode overlaps, crosstalk matrices, Fisher information,
resolution limits and photon-count estimation.
"""
