"""Scenario-driven multi-node simulation."""
