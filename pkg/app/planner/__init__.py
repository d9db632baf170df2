"""Restriction-aware route planning: data model, index build and query engine."""
