"""bdcnet main entry point."""

from bdcnet.cli import cli

if __name__ == "__main__":
    cli()
