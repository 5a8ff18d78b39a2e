# This file makes the "measurements" directory a Python package.
