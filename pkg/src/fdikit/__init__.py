"""Diagnoser synthesis and verification for partially observable plants."""

__version__ = "0.1.0"
