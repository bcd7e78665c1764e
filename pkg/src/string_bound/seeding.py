"""
seeding.py - Reproducible random streams for StringBound

Every random draw in the project comes from a stream identified by
(master_seed, purpose, replica). Streams use the counter-based Philox bit
generator, so any sample can be regenerated from its label alone and two
streams with different labels never share state.
"""

import logging
import zlib
from typing import Iterable

import numpy as np

logger = logging.getLogger(__name__)

# Purpose tags used across the project.
PURPOSE_NOISE = "noise"
PURPOSE_BRIDGE = "bridge"
PURPOSE_INITIAL = "initial"


def stream_label(master_seed: int, purpose: str, replica: int = 0) -> str:
    """Canonical label of a stream."""
    return f"{master_seed}:{purpose}:{replica}"


def spawn_stream(
    master_seed: int, purpose: str, replica: int = 0
) -> np.random.Generator:
    """
    Build the generator for (master_seed, purpose, replica).

    Args:
        master_seed: Non-negative master seed of the run.
        purpose: Tag naming what the stream is used for.
        replica: Replica index within that purpose.

    Returns:
        A numpy Generator backed by Philox.
    """
    if master_seed < 0 or replica < 0:
        raise ValueError("master_seed and replica must be non-negative")
    key = zlib.crc32(purpose.encode("utf-8"))
    seq = np.random.SeedSequence([master_seed, replica, key])
    logger.debug("Spawned stream %s", stream_label(master_seed, purpose, replica))
    return np.random.Generator(np.random.Philox(seq))


def streams_disjoint(labels: Iterable[str]) -> bool:
    """True iff no label appears twice."""
    labels = list(labels)
    return len(labels) == len(set(labels))
