"""Command-line interface for ghostkit."""
