#!/usr/bin/env python3
"""
Path utilities for scripts: locate the project root and put src/ on the
import path.
"""

import sys
from pathlib import Path

ROOT_MARKERS = ("pyproject.toml", "src")


def get_project_root() -> Path:
    """Walk up from this file until a directory holds every root marker."""
    candidate = Path(__file__).resolve().parent
    while candidate.parent != candidate:
        if all((candidate / marker).exists() for marker in ROOT_MARKERS):
            return candidate
        candidate = candidate.parent
    return Path(__file__).resolve().parent.parent


def setup_project_paths() -> Path:
    """
    Set up paths for scripts to import from src/.

    Returns:
        Path: The project root path
    """
    project_root = get_project_root()
    src_path = str(project_root / "src")
    if src_path not in sys.path:
        sys.path.insert(0, src_path)
    return project_root


def get_config_path() -> Path:
    return get_project_root() / "config"


def get_default_config() -> Path:
    return get_config_path() / "nptrack.yaml"


def get_runs_path() -> Path:
    """Default location for script outputs."""
    return get_project_root() / "runs"


if __name__ == "__main__":
    root = setup_project_paths()
    print(f"Project root: {root}")
    print(f"Config path: {get_config_path()}")
    print(f"Runs path: {get_runs_path()}")
