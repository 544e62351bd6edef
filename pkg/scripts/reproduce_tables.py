#!/usr/bin/env python3
"""
Regenerate the three Newton tables (example1-sinpi, example1-sin2pi and
example2) at n = 10 and n = 100
"""
import sys
import os

# Add parent directory to path so we can import app
script_dir = os.path.dirname(os.path.abspath(__file__))
parent_dir = os.path.dirname(script_dir)
sys.path.insert(0, parent_dir)

from app.cli import EXIT_NOT_CONVERGED, EXIT_OK, RunConfig, run
import logging

logging.basicConfig(level=logging.WARNING)
logger = logging.getLogger(__name__)

TABLES = ["example1-sinpi", "example1-sin2pi", "example2"]


def main():
    """Print each table, optionally writing iteration CSVs to a directory"""
    import argparse

    parser = argparse.ArgumentParser(description="Reproduce the Newton iteration tables")
    parser.add_argument("--n", default="10,100", help="Grid sizes (comma-separated)")
    parser.add_argument("--csv-dir", help="Directory for one iteration CSV per table")
    args = parser.parse_args()

    failed = False
    for problem_id in TABLES:
        print("=" * 60)
        csv = os.path.join(args.csv_dir, f"{problem_id}.csv") if args.csv_dir else None
        status = run(RunConfig(problem=problem_id, n=args.n, csv=csv))
        if status not in (EXIT_OK, EXIT_NOT_CONVERGED):
            failed = True
            logger.error(f"{problem_id} finished with exit status {status}")
    print("=" * 60)

    if failed:
        sys.exit(1)


if __name__ == "__main__":
    main()
