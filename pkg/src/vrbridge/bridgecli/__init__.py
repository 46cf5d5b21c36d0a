"""Command-line entry point and protocol server for the bridge."""
