"""Deterministic random streams.

Every randomized routine in the package draws from a Philox counter-based
generator keyed by (seed, stream). Streams are independent, so instance i of a
dataset can be regenerated without producing instances 0..i-1 first.
"""

import numpy as np

# stream tags; keep stable, they are part of reproducibility
STREAM_DENSE = 1
STREAM_BLOCK = 2
STREAM_SPARSIFY = 3
STREAM_MODEL_INIT = 4
STREAM_TRAIN_SHUFFLE = 5
STREAM_SEED_RANDOM = 6
STREAM_NOISE = 7
STREAM_PERMUTATION = 8
STREAM_FUZZ = 9


def substream(seed: int, stream: int, index: int = 0) -> np.random.Generator:
    """Generator for substream `index` of the given (seed, stream) pair.

    Philox takes a 128-bit key: the seed fills one word, the stream tag and
    substream index are packed into the other.
    """
    if not 0 <= index < (1 << 48):
        raise ValueError(f"substream index out of range: {index}")
    key = np.array(
        [int(seed) % 2**64, ((int(stream) << 48) | int(index)) % 2**64],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key))
