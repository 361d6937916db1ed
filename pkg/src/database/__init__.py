"""SQLite persistence for session state."""
