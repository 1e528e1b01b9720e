"""Permissioned ledger: transactions, endorsement, ordering, commit and chain files."""
