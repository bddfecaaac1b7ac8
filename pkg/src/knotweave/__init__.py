"""Jones values of braid closures at the fifth root of unity."""

__version__ = "0.1.0"
