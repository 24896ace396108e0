"""Tests for causal-cde."""
