"""Spectral radii of weighted composition operators on finite dynamical systems."""
