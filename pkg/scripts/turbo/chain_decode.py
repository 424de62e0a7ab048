#!/usr/bin/env python3
"""Decoderen van een gekoppelde keten: FF-FB sweeps en sliding window.

Elk blok heeft 3K componentposities (sys, pu, pl). De extrinsieke uitvoer van
alle blokken staat in één vlakke array E[L·3K]; de externe prior van een
gekoppelde positie is E van het andere optreden van dezelfde variabele.
Vaste nullen (index −1) zijn Known0 in het kanaalbeeld.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from turbo.codec import TurboConfig, TurboExtrinsics, turbo_decode
from turbo.coupling import ChainLayout
from turbo.settings import ConfigError, InconsistentTraceError
from turbo.trellis import ERASED, KNOWN0

MAX_OUTER = 100


@dataclass
class DecodeResult:
    info: np.ndarray                    # ternair, volgorde van de infostroom
    app: np.ndarray                     # a-posteriori per variabele
    sweeps: int
    known_history: list[int] = field(default_factory=list)
    erasures_per_block: list[np.ndarray] = field(default_factory=list)

    @property
    def erased_info(self) -> int:
        return int((self.info == ERASED).sum())


class ChainDecoder:
    """Houdt de extrinsieke toestand van één keten bij."""

    def __init__(self, layout: ChainLayout, received: np.ndarray, inner_iterations: int | None = None):
        received = np.asarray(received, dtype=np.int8)
        if received.shape != (layout.n_vars,):
            raise ConfigError(f"ontvangen spoor heeft lengte {received.shape}, verwacht {layout.n_vars}")
        self.layout = layout
        self.received = received
        self.inner_iterations = inner_iterations or layout.cfg.inner_iterations
        K, L = layout.K, layout.L
        occ = np.stack([layout.sys_var, layout.pu_var, layout.pl_var], axis=1).reshape(L, 3 * K)
        self.occ = occ
        self.channel = np.where(occ >= 0, received[np.maximum(occ, 0)], KNOWN0).astype(np.int8)
        self.tails = received[layout.tail_var]
        self.extrinsic = np.full(L * 3 * K, ERASED, dtype=np.int8)
        self.configs = [TurboConfig(K, layout.interleavers[t], layout.cfg.generator) for t in range(L)]
        self.visits = 0

    def visit(self, t: int) -> bool:
        """Draai de turbo-decoder op blok t; True als E veranderd is."""
        K = self.layout.K
        lo, hi = t * 3 * K, (t + 1) * 3 * K
        partner = self.layout.partner[lo:hi]
        ext = np.where(partner >= 0, self.extrinsic[np.maximum(partner, 0)], ERASED).astype(np.int8)
        ch = self.channel[t]
        out, _ = turbo_decode(
            self.configs[t],
            TurboExtrinsics(ch[:K], ch[K:2 * K], ch[2 * K:]),
            TurboExtrinsics(ext[:K], ext[K:2 * K], ext[2 * K:]),
            self.tails[t, 0], self.tails[t, 1],
            iterations=self.inner_iterations,
        )
        new = np.concatenate([out.info, out.parity_upper, out.parity_lower])
        old = self.extrinsic[lo:hi]
        flipped = (old != ERASED) & (new != old)
        if flipped.any():
            raise InconsistentTraceError(f"blok {t}: Known-waarde veranderd tussen iteraties")
        changed = bool((new != old).any())
        self.extrinsic[lo:hi] = new
        self.visits += 1
        return changed

    def sweep(self, blocks: range) -> bool:
        """FF over blocks, dan FB terug (laatste blok niet dubbel)."""
        changed = False
        for t in blocks:
            changed |= self.visit(t)
        for t in reversed(blocks[:-1]):
            changed |= self.visit(t)
        return changed

    def app(self) -> np.ndarray:
        """Combineer kanaal met alle extrinsieke uitspraken per variabele."""
        app = self.received.copy()
        occ = self.occ.reshape(-1)
        mask = (occ >= 0) & (self.extrinsic != ERASED)
        var, val = occ[mask], self.extrinsic[mask]
        clash = (app[var] != ERASED) & (app[var] != val)
        if clash.any():
            raise InconsistentTraceError(f"variabele {int(var[np.argmax(clash)])}: kanaal en decoder verschillen")
        app[var] = val
        if np.any(app[var] != val):
            raise InconsistentTraceError("twee blokken geven verschillende waarden voor dezelfde variabele")
        return app

    def erasures_per_block(self, app: np.ndarray) -> np.ndarray:
        lay = self.layout
        info_blocks = lay.var_block[lay.info_vars]
        erased_info = app[lay.info_vars] == ERASED
        return np.bincount(info_blocks[erased_info], minlength=lay.L)

    def result(self, sweeps: int, history: list[int], per_block: list[np.ndarray]) -> DecodeResult:
        app = self.app()
        return DecodeResult(app[self.layout.info_vars], app, sweeps, history, per_block)


def _known(app: np.ndarray) -> int:
    return int((app != ERASED).sum())


def ff_fb_decode(layout: ChainLayout, received: np.ndarray, max_outer: int = MAX_OUTER,
                 inner_iterations: int | None = None) -> DecodeResult:
    """FF-FB over de hele keten tot globale stilstand of max_outer sweeps."""
    dec = ChainDecoder(layout, received, inner_iterations)
    history, per_block = [], []
    sweeps = 0
    blocks = range(layout.L)
    while sweeps < max_outer:
        changed = dec.sweep(blocks)
        sweeps += 1
        app = dec.app()
        history.append(_known(app))
        per_block.append(dec.erasures_per_block(app))
        if not changed:
            break
    return dec.result(sweeps, history, per_block)


def window_decode(layout: ChainLayout, received: np.ndarray, window: int,
                  iterations_per_window: int | None = None, max_outer: int = MAX_OUTER,
                  inner_iterations: int | None = None) -> DecodeResult:
    """FF-FB binnen een venster van W blokken; blok s wordt vastgelegd en het venster schuift.

    Blokken buiten het venster houden hun laatste extrinsieke waarden.
    """
    m, L = layout.cfg.m, layout.L
    if window < m + 1:
        raise ConfigError(f"venster W={window} < m+1={m + 1}")
    window = min(window, L)
    budget = min(iterations_per_window or max_outer, max_outer)
    dec = ChainDecoder(layout, received, inner_iterations)
    history, per_block = [], []
    sweeps = 0
    for s in range(L - window + 1):
        blocks = range(s, s + window)
        for _ in range(budget):
            changed = dec.sweep(blocks)
            sweeps += 1
            if not changed:
                break
        app = dec.app()
        history.append(_known(app))
        per_block.append(dec.erasures_per_block(app))
    return dec.result(sweeps, history, per_block)
