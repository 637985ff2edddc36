import asyncio
import sys

from ntkparam.cli import main as async_main


def main() -> None:
    """Synchronous entry point for the console_scripts entrypoint."""
    sys.exit(asyncio.run(async_main()))


if __name__ == "__main__":
    main()
