"""Incentive-compatible contextual bandit recommender and its experiment harness."""

import sys


def main() -> None:
    from rcbandit.cli import main as cli_main

    sys.exit(cli_main())
