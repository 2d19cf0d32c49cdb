"""Deterministic sub-seed derivation.

One root u64 seed per run; every randomized component derives its own
sub-seed by hashing (root, purpose-tag, index...) so experiments are
reproducible component-wise and independent components never share a
stream.
"""

import hashlib


def derive_seed(root: int, *parts) -> int:
    """Return a stable 64-bit seed from a root seed and purpose tags.

    Uses blake2b rather than ``hash()`` so the value is identical across
    interpreter runs and platforms.
    """
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(root)).encode())
    for part in parts:
        h.update(b"/")
        h.update(str(part).encode())
    return int.from_bytes(h.digest(), "big")
