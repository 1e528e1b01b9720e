"""Participant identities, keys, signatures and admission."""
