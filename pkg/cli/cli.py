"""Command-line interface entry point for pychdp.

This module serves as the main entry point for the CHDP CLI application.
It imports and runs the CLI implementation from the pychdp_cli package.
"""

from pychdp_cli.__main__ import cli

if __name__ == "__main__":
    cli()
