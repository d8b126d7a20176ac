"""relux: exact region analysis, bound formulas and network compilers for ReLU networks."""
__version__ = "0.1.0"
