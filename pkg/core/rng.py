"""
Counter-based random streams
One Philox stream per (master seed, label, index); streams never share state.
"""

import hashlib

import numpy as np

from core.errors import DomainError

U64_MASK = (1 << 64) - 1


def _hash_to_u64(text: str) -> int:
    digest = hashlib.sha256(text.encode("ascii")).digest()
    return int.from_bytes(digest[:8], "big", signed=False)


def check_seed(seed: int) -> int:
    if not 0 <= int(seed) <= U64_MASK:
        raise DomainError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return int(seed)


def derive_seed(master_seed: int, label: str, index: int = 0) -> int:
    """Stable child seed for a named sub-experiment."""
    if index < 0:
        raise DomainError("stream index must be non-negative")
    return _hash_to_u64(f"{check_seed(master_seed)}:{label}:{index}")


def stream(master_seed: int, index: int, label: str = "path") -> np.random.Generator:
    """Generator for stream `index`; identical inputs replay identical draws."""
    key = derive_seed(master_seed, label, index)
    return np.random.Generator(np.random.Philox(key=key))
