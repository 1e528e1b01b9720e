"""Shared configuration, errors, logging and encoding for dndchain."""
