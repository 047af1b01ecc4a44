"""Free-field chiral algebra engine."""
__version__ = "0.1.0"
