"""Offline stand-in for pip used by the replay fixtures."""
