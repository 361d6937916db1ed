"""Operation-count analysis and benchmark tables."""
