"""Bundled benchmark scenarios (JSON files next to this module)."""
