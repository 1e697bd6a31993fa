"""Bundled YAML configurations, loaded through ``trajdist.harness.config.load_preset``."""
