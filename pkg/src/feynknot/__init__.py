"""Configuration-space integrals for knots: diagrams, strata, Monte-Carlo integrals and bundle checks."""

__version__ = "0.1.0"
