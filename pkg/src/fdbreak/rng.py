"""Counter-based random streams.

Every random draw in the package comes from a Philox generator whose key is
derived from ``(seed, *keys)``. A stream therefore depends only on its
coordinates, never on how many workers ran before it, which is what makes
parallel Monte Carlo runs reproducible bit for bit.
"""

import numpy as np

# stream tags, so that different consumers of one seed never collide
DATA = 1
BRIDGE = 2
JUMP = 3
REPLICATE = 4

BLOCK = 256  # replicates per stream block in the quantile simulators


def stream(seed: int, *keys: int) -> np.random.Generator:
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *map(int, keys)])
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *keys: int) -> int:
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *map(int, keys)])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
