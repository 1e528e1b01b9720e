"""On-chain registries: entities and headers, templates, preferences and consent."""
