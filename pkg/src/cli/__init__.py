"""Command-line entry points and figure rendering."""
