"""Run orchestration."""

from causal_cde.harness.runner import DiscoveryHarness, LoadedData

__all__ = ["DiscoveryHarness", "LoadedData"]
