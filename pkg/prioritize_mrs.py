#!/usr/bin/env python3
"""
Run the MR prioritizer from a source checkout:

    python prioritize_mrs.py prioritize --kills data/demo_prioritizing.csv --seed 7
    python prioritize_mrs.py evaluate --config data/example_config.json --out reports
"""

import sys

from mr_prioritizer.cli import main

if __name__ == "__main__":
    sys.exit(main())
