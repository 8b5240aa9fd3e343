"""Test package for Ratchet Transport."""
