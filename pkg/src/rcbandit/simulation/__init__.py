"""Synthetic environments, experiment presets and evaluation metrics."""
