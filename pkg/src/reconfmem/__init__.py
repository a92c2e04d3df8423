"""Behavioural simulation of reconfigurable filamentary memristors and the systems built on them."""

__version__ = "0.1.0"
