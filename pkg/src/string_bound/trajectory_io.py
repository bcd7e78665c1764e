"""
trajectory_io.py

Binary trajectory files and tabular exports.

A trajectory file is little-endian throughout:

    magic "RSTR", version u16
    d u16, M u32, record_count u64, dt f64, record_every u32, n f64, seed u64
    descriptor length u32, descriptor (UTF-8 JSON of domain, potential, grid)
    record_count frames of: time f64, M*d values f64, M*d penalty values f64

Reading a written file gives back a bit-identical Trajectory.
"""

import json
import logging
import os
import struct
from pathlib import Path
from typing import Sequence, Union

import numpy as np
import pandas as pd

from integrator import Trajectory
from observables import ContactRecord, contact_records_frame
from pathspace import Grid, WeightedBatch
from verify import VerificationReport, summary_table

# Set up a module-level logger.
logger = logging.getLogger(__name__)

MAGIC = b"RSTR"
FORMAT_VERSION = 1
_PREAMBLE = struct.Struct("<4sH")
_HEADER = struct.Struct("<HIQdIdQ")
_LENGTH = struct.Struct("<I")
_F64 = np.dtype("<f8")

PathArg = Union[str, os.PathLike]


class TrajectoryFormatError(Exception):
    """Raised when a trajectory file cannot be decoded."""

    def __init__(self, path: PathArg, offset: int, message: str):
        super().__init__(f"{path} (byte offset {offset}): {message}")
        self.path = str(path)
        self.offset = offset


class MagicError(TrajectoryFormatError):
    """The file does not start with the trajectory magic bytes."""

    pass


class VersionError(TrajectoryFormatError):
    """The file was written by an unsupported format version."""

    pass


class TruncationError(TrajectoryFormatError):
    """The file ends before the data promised by its header."""

    pass


# ========================================================================== #
# Binary trajectory files
# ========================================================================== #
def write_trajectory(traj: Trajectory, path: PathArg) -> None:
    """
    Write traj to path in the trajectory file layout.

    Raises:
        OSError: Re-raised with the path and the byte offset reached.
    """
    count, M, d = traj.states.shape
    descriptor = traj.descriptor.encode("utf-8")
    frames = np.concatenate(
        [
            traj.times.astype(_F64).reshape(count, 1),
            traj.states.astype(_F64).reshape(count, M * d),
            traj.penalty_accum.astype(_F64).reshape(count, M * d),
        ],
        axis=1,
    )
    offset = 0
    try:
        with open(path, "wb") as handle:
            for chunk in (
                _PREAMBLE.pack(MAGIC, FORMAT_VERSION),
                _HEADER.pack(d, M, count, traj.dt, traj.record_every, traj.n, traj.seed),
                _LENGTH.pack(len(descriptor)),
                descriptor,
                frames.tobytes(),
            ):
                handle.write(chunk)
                offset += len(chunk)
    except OSError as e:
        logger.error("Error writing trajectory %s at byte %d: %s", path, offset, e)
        raise OSError(e.errno, f"{e.strerror} (byte offset {offset})", str(path)) from e
    logger.info("Trajectory with %d records written to %s", count, path)


def _take(data: bytes, offset: int, size: int, path: PathArg, what: str) -> bytes:
    if offset + size > len(data):
        raise TruncationError(
            path, len(data), f"file ends while reading {what} ({size} bytes needed at {offset})"
        )
    return data[offset: offset + size]


def read_trajectory(path: PathArg) -> Trajectory:
    """
    Inverse of write_trajectory.

    Raises:
        MagicError, VersionError, TruncationError: For malformed files.
        TrajectoryFormatError: If the descriptor is not valid JSON.
    """
    data = Path(path).read_bytes()
    magic, version = _PREAMBLE.unpack(_take(data, 0, _PREAMBLE.size, path, "the preamble"))
    if magic != MAGIC:
        raise MagicError(path, 0, f"bad magic bytes {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise VersionError(path, 4, f"format version {version}, expected {FORMAT_VERSION}")
    offset = _PREAMBLE.size
    d, M, count, dt, record_every, n, seed = _HEADER.unpack(
        _take(data, offset, _HEADER.size, path, "the header")
    )
    offset += _HEADER.size
    (length,) = _LENGTH.unpack(_take(data, offset, _LENGTH.size, path, "the descriptor length"))
    offset += _LENGTH.size
    raw = _take(data, offset, length, path, "the descriptor")
    try:
        descriptor = raw.decode("utf-8")
        grid_section = json.loads(descriptor)["grid"]
        grid = Grid(M, np.array(grid_section["a"], dtype=float), np.array(grid_section["b"], dtype=float))
    except (UnicodeDecodeError, ValueError, KeyError, TypeError) as e:
        raise TrajectoryFormatError(path, offset, f"unreadable descriptor: {e}")
    if grid.d != d:
        raise TrajectoryFormatError(path, offset, f"descriptor dimension {grid.d} != header d {d}")
    offset += length

    width = 1 + 2 * M * d
    body = _take(data, offset, count * width * _F64.itemsize, path, f"{count} frames")
    if offset + len(body) != len(data):
        logger.warning(
            "Trajectory %s has %d trailing bytes after the last frame",
            path, len(data) - offset - len(body),
        )
    frames = np.frombuffer(body, dtype=_F64).reshape(count, width).astype(float)
    trajectory = Trajectory(
        times=frames[:, 0].copy(),
        states=frames[:, 1: 1 + M * d].reshape(count, M, d).copy(),
        penalty_accum=frames[:, 1 + M * d:].reshape(count, M, d).copy(),
        grid=grid,
        dt=dt,
        record_every=record_every,
        n=n,
        seed=seed,
        descriptor=descriptor,
    )
    logger.info("Read trajectory with %d records from %s", count, path)
    return trajectory


# ========================================================================== #
# Tables
# ========================================================================== #
def trajectory_frame(traj: Trajectory) -> pd.DataFrame:
    """Long table: one row per (record, node, component)."""
    count, M, d = traj.states.shape
    return pd.DataFrame(
        {
            "time": np.repeat(traj.times, M * d),
            "theta": np.tile(np.repeat(traj.grid.theta, d), count),
            "component": np.tile(np.arange(d), count * M),
            "value": traj.states.reshape(-1),
            "penalty": traj.penalty_accum.reshape(-1),
        }
    )


def samples_frame(batch: WeightedBatch, grid: Grid) -> pd.DataFrame:
    """Long table of sampled paths with their log importance weights."""
    count = len(batch.paths)
    M, d = grid.M, grid.d
    return pd.DataFrame(
        {
            "sample": np.repeat(np.arange(count), M * d),
            "theta": np.tile(np.repeat(grid.theta, d), count),
            "component": np.tile(np.arange(d), count * M),
            "value": batch.paths.reshape(-1),
            "log_weight": np.repeat(batch.log_weights, M * d),
        }
    )


def save_frame(frame: pd.DataFrame, path: PathArg, fmt: str = "csv") -> None:
    """Write a table as CSV or as an Excel workbook."""
    try:
        if fmt == "csv":
            frame.to_csv(path, index=False)
        elif fmt == "xlsx":
            frame.to_excel(path, index=False, engine="openpyxl")
        else:
            raise ValueError(f"unknown table format {fmt!r}")
        logger.info("Table with %d rows saved to %s", len(frame), path)
    except OSError as e:
        logger.error("Error saving table to %s: %s", path, e)
        raise


def export_trajectory(traj: Trajectory, path: PathArg, fmt: str = "csv") -> None:
    save_frame(trajectory_frame(traj), path, fmt)


def write_contact_records(records: Sequence[ContactRecord], grid: Grid, path: PathArg) -> None:
    save_frame(contact_records_frame(records, grid), path)


def write_reports(
    reports: Sequence[VerificationReport], directory: PathArg, excel: bool = False
) -> Path:
    """
    One JSON file per report plus a text summary (and optionally a
    workbook) in directory.

    Returns:
        The path of the text summary.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for index, report in enumerate(reports):
        target = directory / f"{index:02d}_{report.test_name}.json"
        target.write_text(report.to_json() + "\n", encoding="utf-8")
    table = summary_table(reports)
    summary = directory / "summary.txt"
    summary.write_text(table.to_string(index=False) + "\n", encoding="utf-8")
    if excel:
        save_frame(table, directory / "summary.xlsx", "xlsx")
    logger.info("Wrote %d reports to %s", len(reports), directory)
    return summary
