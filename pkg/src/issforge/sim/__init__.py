"""Simulator generation and run-time support."""
