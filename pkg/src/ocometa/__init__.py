"""Meta-algorithms for online convex optimization."""
