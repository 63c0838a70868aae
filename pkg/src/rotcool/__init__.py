"""Sympathetic rotational cooling of trapped asymmetric-top molecular ions."""

__version__ = "0.1.0"
