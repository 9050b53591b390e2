"""Named random streams derived from one integer seed.

``stream(seed, "label")`` always yields the same generator for the same
pair, and different labels give unrelated streams, so adding a new consumer
never shifts the draws seen by an existing one.
"""

import hashlib
import random


def stream(seed: int, label: str) -> random.Random:
    digest = hashlib.sha256(f"kohnlab:{int(seed)}:{label}".encode()).digest()
    return random.Random(int.from_bytes(digest[:16], "big"))
