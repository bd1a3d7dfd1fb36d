"""
Script to run the command-line interface.
"""

import logging
import sys

from app.cli import main
from config.config import Config

if __name__ == "__main__":
    # Validate configuration settings
    Config.validate()

    logging.basicConfig(
        level=logging.DEBUG if Config.DEBUG else Config.LOG_LEVEL,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    sys.exit(main())
