"""Desk-scale two-stage virtual screening: parsing, fingerprints, models, losses and evaluation."""

__version__ = "0.1.0"
