"""Subscriber-facing HTTP surface over a running consortium."""

from dndchain.api.app import create_app

__all__ = ["create_app"]
