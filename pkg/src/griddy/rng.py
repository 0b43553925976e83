"""Counter-based uniform streams shared by all samplers.

Every chain draws its randomness from a single Philox-4x64 stream keyed by
the chain seed.  The stream is laid out in fixed slots: coordinate update
(step, axis) owns the ``SLOT_WIDTH`` consecutive uniforms starting at
``((step * d) + axis) * SLOT_WIDTH``.  A sampler reads only the slot entries
it needs (exact and grid-based samplers read entry 0, the accept/reject
variant also reads entry 1), so two samplers with the same seed see exactly
the same uniform at the same coordinate update.  That alignment is what makes
degeneracy checks between samplers meaningful at the bit level.
"""

from __future__ import annotations

import numpy as np

__all__ = ["SLOT_WIDTH", "uniform_slots"]

# Per-update slot: entry 0 drives the inverse-CDF draw, entry 1 the
# accept/reject comparison.  Widening this constant would silently re-key
# every chain, so treat it as part of the stream protocol.
SLOT_WIDTH = 2

# Second Philox key word, fixed so that a seed alone identifies a stream.
_KEY_SALT = 0x9E3779B97F4A7C15


def uniform_slots(seed: int, n_steps: int, dim: int) -> np.ndarray:
    """Uniform slot array of shape (n_steps, dim, SLOT_WIDTH) for one chain.

    The array is the prefix of the seed's Philox stream, reshaped; slots for
    early steps do not depend on ``n_steps``, so extending a chain keeps its
    history bit-identical.
    """
    if seed < 0:
        raise ValueError(f"seed must be nonnegative, got {seed}")
    key = np.array([np.uint64(seed), np.uint64(_KEY_SALT)], dtype=np.uint64)
    gen = np.random.Generator(np.random.Philox(key=key))
    flat = gen.random(n_steps * dim * SLOT_WIDTH)
    return flat.reshape(n_steps, dim, SLOT_WIDTH)
