"""Slow statistical recovery checks for causal-cde."""
