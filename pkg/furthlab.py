#!/usr/bin/env python3
"""
furthlab launcher
python furthlab.py <verb> [flags]; same as python -m cli.main
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

from cli.main import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
