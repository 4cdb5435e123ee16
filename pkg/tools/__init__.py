"""File-level helpers: suite registry and run recorders."""
