"""Identification of randomly activated users with scheduled K-user detection and SIC."""

__version__ = "0.1.0"
