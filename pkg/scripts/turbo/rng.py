#!/usr/bin/env python3
"""Counter-based random streams: elke (seed, keten, blok, rol) krijgt een eigen Philox-sleutel.

Daardoor hangt de uitkomst van een trial niet af van de volgorde waarin
threads hun werk oppakken.
"""

from __future__ import annotations

import numpy as np

# Rollen: welk onderdeel van een transmissie de stroom voedt
INFO        = 0
INTERLEAVER = 1
PUNCTURE    = 2
CHANNEL     = 3
POSITIONS   = 4
SWEEP       = 5     # extra sleutel voor ε-punten in een BER-sweep


def stream(seed: int, *counters: int) -> np.random.Generator:
    """Onafhankelijke generator voor de gegeven tellers."""
    key = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *(int(c) for c in counters)])
    return np.random.Generator(np.random.Philox(key=key.generate_state(2, dtype=np.uint64)))


def chain_seed(seed: int, eps_index: int) -> int:
    """Afgeleide seed per ε-punt, zodat sweeps met meer punten eerdere punten niet verschuiven."""
    return int(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, SWEEP, eps_index]).generate_state(1)[0])
