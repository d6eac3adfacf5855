"""2D time-harmonic Maxwell inverse medium toolkit."""

__version__ = "0.1.0"
