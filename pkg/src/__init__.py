"""Elastic Neumann-Poincare spectrum on spheres and core-shell resonance."""
