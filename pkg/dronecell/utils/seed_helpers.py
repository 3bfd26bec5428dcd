# Python standard library imports
import hashlib

# Third-party imports
import numpy as np


def derive_seed(master_seed, *labels):
    """
    Derive an independent 64-bit seed for one subsystem.

    The master seed and the label path are joined ("1234/solar/3") and hashed
    with SHA-256; the first 8 bytes become the child seed. Children of the same
    master never depend on the order in which they are requested, so adding a
    new consumer of randomness does not perturb existing streams.

    Returns: int in [0, 2**64)
    """
    path = "/".join(str(label) for label in labels)
    digest = hashlib.sha256(f"{int(master_seed)}/{path}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def make_rng(master_seed, *labels):
    """numpy Generator seeded from derive_seed(master_seed, *labels)."""
    return np.random.default_rng(derive_seed(master_seed, *labels))


def git_blob_sha1(data):
    """Content hash computed the way `git hash-object` does for a blob."""
    header = f"blob {len(data)}\0".encode()
    return hashlib.sha1(header + data).hexdigest()
