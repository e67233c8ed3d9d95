#!/usr/bin/env python3
"""
Entry point: python applications/dialrank.py <command> [options], see --help.
"""
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from dialrank.cli import dispatch  # noqa: E402

if __name__ == '__main__':
    sys.exit(dispatch())
