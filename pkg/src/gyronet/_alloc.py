"""Optional glibc allocator tuning for fault-expensive environments.

Training repeatedly allocates and frees multi-megabyte scratch arrays.
With glibc defaults those blocks are mmap'd and returned to the kernel on
every free, so each epoch re-faults tens of megabytes; inside micro-VM
sandboxes a minor fault can cost tens of microseconds, dominating the
epoch.  Raising the mmap/trim thresholds keeps freed blocks in the arena
for reuse.  No-op on non-glibc platforms.
"""

from __future__ import annotations

import ctypes

_M_TRIM_THRESHOLD = -1
_M_MMAP_THRESHOLD = -3

_done = False


def tune_allocator(mmap_threshold: int = 128 * 1024 * 1024,
                   trim_threshold: int = 512 * 1024 * 1024) -> bool:
    """Raise glibc's malloc thresholds; returns True if both calls took."""
    global _done
    if _done:
        return True
    try:
        libc = ctypes.CDLL(None)
        ok = bool(libc.mallopt(_M_MMAP_THRESHOLD, mmap_threshold)) and \
            bool(libc.mallopt(_M_TRIM_THRESHOLD, trim_threshold))
    except (OSError, AttributeError):
        return False
    _done = ok
    return ok
