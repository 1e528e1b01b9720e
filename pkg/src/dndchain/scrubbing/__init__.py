"""Scrubbing: mirror index, deliverable-set computation, encrypted files and tokens."""
