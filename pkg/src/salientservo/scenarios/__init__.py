"""Bundled scenario fixtures, two per manipulation context."""
