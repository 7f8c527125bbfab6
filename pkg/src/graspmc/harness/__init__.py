"""Experiment harness: configuration, seeded runs, persistence and the CLI."""
