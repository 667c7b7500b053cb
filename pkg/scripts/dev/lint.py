#!/usr/bin/env python3
"""
Code quality gate for nptrack: flake8, black, mypy and the fast test suite.

    python scripts/dev/lint.py [--fix] [--with-slow]
"""

import subprocess
import sys
from pathlib import Path

import click
from loguru import logger

sys.path.insert(0, str(Path(__file__).parent.parent.parent))
from scripts.path_utils import setup_project_paths  # noqa: E402

MAX_LINE = 110
SOURCES = ["src/", "scripts/", "tests/"]


def run_check(cmd, description: str, cwd: Path) -> bool:
    logger.info(f"{description}...")
    result = subprocess.run(cmd, cwd=cwd, capture_output=True, text=True, encoding="utf-8")
    if result.returncode == 0:
        logger.info(f"{description} passed")
        return True
    logger.error(f"{description} failed")
    for stream in (result.stdout, result.stderr):
        if stream.strip():
            logger.error(stream.rstrip())
    return False


@click.command()
@click.option("--fix", is_flag=True, help="Reformat with black instead of checking")
@click.option("--with-slow", is_flag=True, help="Include tests marked slow")
def main(fix: bool, with_slow: bool):
    """Run all code quality checks and exit non-zero on any failure."""
    root = setup_project_paths()
    black = ["black", f"--line-length={MAX_LINE}"] + ([] if fix else ["--check", "--diff"])
    pytest_cmd = [sys.executable, "-m", "pytest", "-q"] + ([] if with_slow else ["-m", "not slow"])
    checks = [
        (
            ["flake8", *SOURCES, f"--max-line-length={MAX_LINE}", "--extend-ignore=E203,W503"],
            "Flake8 linting",
        ),
        (black + SOURCES, "Black formatting"),
        (["mypy", "src/", "--config-file", "mypy.ini"], "MyPy type checking"),
        (pytest_cmd, "Test suite"),
    ]

    results = [(description, run_check(cmd, description, root)) for cmd, description in checks]
    passed = sum(ok for _, ok in results)
    for description, ok in results:
        logger.info(f"  {'ok  ' if ok else 'FAIL'} {description}")
    logger.info(f"{passed}/{len(results)} checks passed")
    sys.exit(0 if passed == len(results) else 1)


if __name__ == "__main__":
    main()
