"""Module entry point: ``python -m sitdyn``."""

from __future__ import annotations

import sys

from sitdyn.cli import main

if __name__ == "__main__":
    sys.exit(main())
