"""Master-seed derivation: every stage gets ``sha256(master:stage:index)``."""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(master: int, stage: str, index: int = 0) -> int:
    digest = hashlib.sha256(f"{master}:{stage}:{index}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def rng_for(master: int, stage: str, index: int = 0) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, stage, index))
