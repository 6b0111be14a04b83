"""Obstacle-constrained mean curvature flow on uniform 2D grids."""
