"""Deterministic seed derivation.

All randomness in qrisk flows from one master seed; subsystem seeds are
derived by hashing (master, label parts) so independent consumers never
share a stream and reruns are bit-identical.
"""

from __future__ import annotations

import hashlib


def derive_seed(master: int, *parts: object) -> int:
    """Derive a 63-bit child seed from a master seed and label parts."""
    payload = "|".join([str(int(master))] + [str(p) for p in parts])
    digest = hashlib.sha256(payload.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1
