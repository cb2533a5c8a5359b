"""Lower and upper solutions for fixed-point equations u = N(u) on grids."""

__version__ = "0.1.0"
