#!/usr/bin/env python3
"""
PPDSim 入口
运行方式：python app.py <train|laser|sweep|curves> --config <path> --out <dir> [--workers k]
"""

import sys

from ppdsim.cli import main

if __name__ == "__main__":
    sys.exit(main())
