"""Random Schrodinger operators with Gibbs point process potentials."""

__version__ = "0.1.0"
