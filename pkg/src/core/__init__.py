"""Core components package."""
