"""Named random substreams derived from one master seed.

Every stream is keyed by ``(purpose, client, round)`` so that results do
not depend on the order in which clients happen to run.
"""

import numpy as np

INIT = 0
TRAIN = 1
CLIENT_NOISE = 2
SERVER_NOISE = 3
SAMPLE = 4
DATA = 5
PARTITION = 6
EVAL = 7


def stream(master_seed: int, purpose: int, client: int = 0, round_: int = 0) -> np.random.Generator:
    seq = np.random.SeedSequence(int(master_seed), spawn_key=(int(purpose), int(client), int(round_)))
    return np.random.default_rng(seq)


def as_generator(random_state) -> np.random.Generator:
    """Coerce ``None``/int/Generator into a ``numpy.random.Generator``."""
    if isinstance(random_state, np.random.Generator):
        return random_state
    return np.random.default_rng(random_state)
