"""Numerical optimisation: SDPs, magic monotones, diamond norms, multi-restart search."""
