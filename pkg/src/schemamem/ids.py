"""ULID-style identifiers.

Ids are opaque strings that sort lexicographically in creation order within
one process: 48-bit millisecond timestamp plus 80 random bits, Crockford
base32, with a short kind prefix for debuggability. The random tail is
bumped monotonically when two ids land in the same millisecond.
"""

from __future__ import annotations

import os
import threading
import time

_ALPHABET = "0123456789ABCDEFGHJKMNPQRSTVWXYZ"

_lock = threading.Lock()
_last_ms = -1
_last_rand = 0


def _encode(value: int, length: int) -> str:
    out = []
    for _ in range(length):
        out.append(_ALPHABET[value & 0x1F])
        value >>= 5
    return "".join(reversed(out))


def new_ulid() -> str:
    """Return a 26-char ULID, monotone within this process."""
    global _last_ms, _last_rand
    with _lock:
        ms = time.time_ns() // 1_000_000
        if ms <= _last_ms:
            ms = _last_ms
            _last_rand += 1
        else:
            _last_ms = ms
            _last_rand = int.from_bytes(os.urandom(10), "big")
            # keep headroom so the same-millisecond bump cannot overflow
            _last_rand &= (1 << 79) - 1
        rand = _last_rand
    return _encode(ms, 10) + _encode(rand, 16)


def new_id(kind: str) -> str:
    """Id for one of the store kinds: bkt, sch, elt, rec, exp, seg."""
    return f"{kind}_{new_ulid()}"


def id_kind(identifier: str) -> str | None:
    """Kind prefix of an id, or None when the shape is unrecognized."""
    head, _, tail = identifier.partition("_")
    if head in {"bkt", "sch", "elt", "rec", "exp", "seg"} and tail:
        return head
    return None
