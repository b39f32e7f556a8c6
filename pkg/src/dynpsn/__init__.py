"""Dynamic protein structure networks: construction, temporal graphlet
features, and a cross-validated structural-class benchmarking pipeline."""

__version__ = "0.1.0"


class DynpsnError(Exception):
    """Base class for all pipeline errors; CLI maps these to exit status 2."""
