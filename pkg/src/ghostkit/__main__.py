"""Entry point for python -m ghostkit."""

from ghostkit.cli.main import cli

if __name__ == "__main__":
    cli()
