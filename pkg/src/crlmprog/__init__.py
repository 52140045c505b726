"""Leakage-safe, time-specific recurrence prediction toolkit for colorectal liver metastases."""

__version__ = "0.1.0"
