"""Synthesis, execution and minimal repair of collaborative robot behavior
under binding-annotated temporal tasks."""

__version__ = "0.1.0"
