from src.cli import Cli
import logging
import sys

if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO)
    sys.exit(Cli().run())
