"""
Reproducible random streams
"""
import hashlib
from typing import List, Optional

import numpy as np


def spawn_seeds(seed: Optional[int], n: int) -> List[np.random.SeedSequence]:
    """Independent child streams, one per replication"""
    return np.random.SeedSequence(seed).spawn(n)


def cell_seed(master_seed: int, cell_id: str) -> int:
    """Stable 63-bit seed for a named grid cell, independent of evaluation order"""
    digest = hashlib.blake2b(f"{master_seed}:{cell_id}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") >> 1
