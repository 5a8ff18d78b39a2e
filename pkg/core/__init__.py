"""
Core components for demuxlimit: constants, errors, logging, configuration and output.
"""
