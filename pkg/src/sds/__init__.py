"""Spoken-dialogue orchestration server and evaluation harness."""

__version__ = "0.1.0"
