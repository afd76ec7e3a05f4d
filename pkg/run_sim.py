"""Entry point script for running the simulator from a checkout."""

import sys

from app.main import main

if __name__ == "__main__":
    sys.exit(main())
