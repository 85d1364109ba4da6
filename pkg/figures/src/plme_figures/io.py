"""CSV loading and scenario-output discovery for the figure scripts."""

from __future__ import annotations

from pathlib import Path

import numpy as np


class FigureDataError(ValueError):
    pass


def load_csv(path: Path, required: tuple[str, ...]) -> np.ndarray:
    """Read a scenario CSV into a structured array, checking the columns."""
    path = Path(path)
    if not path.exists():
        raise FigureDataError(f"missing data file: {path}")
    data = np.genfromtxt(path, delimiter=",", names=True)
    if data.dtype.names is None:
        raise FigureDataError(f"{path} has no readable header row")
    missing = [c for c in required if c not in data.dtype.names]
    if missing:
        raise FigureDataError(f"{path} is missing columns: {missing}")
    data = np.atleast_1d(data)
    if data.size == 0 or np.all(np.isnan(data[required[0]])):
        raise FigureDataError(f"{path} holds no data rows")
    return data


def find_one(data_dir: Path, pattern: str) -> Path:
    """Locate exactly one scenario output matching a glob pattern."""
    matches = sorted(Path(data_dir).glob(pattern))
    if not matches:
        raise FigureDataError(f"no file matching {pattern!r} under {data_dir}")
    if len(matches) > 1:
        names = ", ".join(m.name for m in matches)
        raise FigureDataError(f"ambiguous inputs for {pattern!r}: {names}")
    return matches[0]


def find_many(data_dir: Path, pattern: str) -> list[Path]:
    matches = sorted(Path(data_dir).glob(pattern))
    if not matches:
        raise FigureDataError(f"no files matching {pattern!r} under {data_dir}")
    return matches
