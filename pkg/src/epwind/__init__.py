"""Eigenvalue braiding around exceptional points of one-parameter matrix families."""
