"""Test package for metaspline."""
