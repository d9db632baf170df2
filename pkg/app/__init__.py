"""Application package for the TRAPP route planner service."""
