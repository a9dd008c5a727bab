"""Derived seeds: one master seed fans out into independent, stable streams.

Every random decision in a sweep (partition, binarization, initialization,
epoch shuffles, sampler reads) draws from a generator seeded by hashing the
master seed together with the decision's coordinates. The hash is a content
hash, so the same coordinates give the same stream on every machine, in any
process, in any execution order.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(master: int, *parts: object) -> int:
    """A 64-bit seed for ``parts`` under ``master``.

    Floats are rendered with ``repr`` so ``0.75`` and ``0.750`` collapse and
    ``0.1 + 0.2`` does not.
    """
    text = repr((int(master), *parts))
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def generator(master: int, *parts: object) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, *parts))
