#!/usr/bin/env python3
"""Parallel geconcateneerde turbo-code: twee identieke RSC-encoders + interleaver.

Codewoord per blok: info (K), upper-pariteit (K), lower-pariteit (K) en per
encoder ν staartparen (sys, par). De decoder wisselt extrinsieke informatie uit
tot er niets meer verandert of het iteratiebudget op is.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import jit

from turbo.settings import ConfigError, InconsistentTraceError
from turbo.trellis import (
    CONFLICT,
    ERASED,
    GeneratorSpec,
    _bcjr_kernel,
    _merge,
    build_trellis,
    erased,
    rsc_encode,
)


@dataclass
class TurboConfig:
    K: int
    interleaver: np.ndarray
    generator: GeneratorSpec = field(default_factory=GeneratorSpec)
    inner_iterations: int | None = None     # None → tot stilstand

    def __post_init__(self):
        self.interleaver = np.ascontiguousarray(self.interleaver, dtype=np.int64)
        if self.K <= 0:
            raise ConfigError(f"K moet positief zijn, kreeg {self.K}")
        if self.interleaver.shape != (self.K,) or not np.array_equal(
                np.sort(self.interleaver), np.arange(self.K)):
            raise ConfigError(f"interleaver is geen permutatie van 0..{self.K - 1}")
        if self.inner_iterations is not None and self.inner_iterations < 1:
            raise ConfigError("inner_iterations moet ≥ 1 zijn")

    @property
    def trellis(self):
        return build_trellis(self.generator)


@dataclass
class TurboCodeword:
    info: np.ndarray
    parity_upper: np.ndarray
    parity_lower: np.ndarray
    tail_upper: np.ndarray      # [ν, 2]
    tail_lower: np.ndarray      # [ν, 2]


@dataclass
class TurboExtrinsics:
    """Ternaire vectoren (lengte K) voor info en beide pariteitsstromen."""
    info: np.ndarray
    parity_upper: np.ndarray
    parity_lower: np.ndarray

    @classmethod
    def all_erased(cls, K: int) -> "TurboExtrinsics":
        return cls(erased(K), erased(K), erased(K))

    def known_count(self) -> int:
        return int(sum((v != ERASED).sum() for v in (self.info, self.parity_upper, self.parity_lower)))


def random_interleaver(K: int, rng: np.random.Generator) -> np.ndarray:
    return rng.permutation(K).astype(np.int64)


def load_interleaver(path: str | Path, K: int) -> np.ndarray:
    """Vaste interleaver uit tekstbestand (witruimte-gescheiden indices)."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"interleaverbestand niet gevonden: {path}")
    perm = np.loadtxt(path, dtype=np.int64).ravel()
    if perm.shape != (K,) or not np.array_equal(np.sort(perm), np.arange(K)):
        raise ConfigError(f"{path}: geen permutatie van lengte K={K}")
    return perm


def turbo_encode(cfg: TurboConfig, info: np.ndarray) -> TurboCodeword:
    info = np.ascontiguousarray(info, dtype=np.int8)
    if info.shape != (cfg.K,):
        raise ConfigError(f"info heeft lengte {info.shape}, verwacht K={cfg.K}")
    trellis = cfg.trellis
    pu, tail_u = rsc_encode(trellis, info, terminate=True)
    pl, tail_l = rsc_encode(trellis, info[cfg.interleaver], terminate=True)
    return TurboCodeword(info.copy(), pu, pl, tail_u, tail_l)


@jit(nopython=True, cache=True, nogil=True)
def _turbo_kernel(next_state, parity_out, perm, ch_sys, ch_pu, ch_pl, ext_sys, ext_pu, ext_pl,
                  tail_u, tail_l, max_iter, out_sys, out_pu, out_pl, counters):
    """Status: -1 ok, -2 conflict bij combineren, ≥0 BCJR-fout op die positie."""
    K = perm.shape[0]
    nu = tail_u.shape[0]
    T = K + nu

    base = np.empty(K, dtype=np.int8)
    sys_u = np.empty(T, dtype=np.int8)
    sys_l = np.empty(T, dtype=np.int8)
    par_u = np.empty(T, dtype=np.int8)
    par_l = np.empty(T, dtype=np.int8)
    for i in range(K):
        x = _merge(ch_sys[i], ext_sys[i])
        y = _merge(ch_pu[i], ext_pu[i])
        z = _merge(ch_pl[i], ext_pl[i])
        if x == CONFLICT or y == CONFLICT or z == CONFLICT:
            return -2
        base[i] = x
        par_u[i] = y
        par_l[i] = z
    for k in range(nu):
        sys_u[K + k] = tail_u[k, 0]
        par_u[K + k] = tail_u[k, 1]
        sys_l[K + k] = tail_l[k, 0]
        par_l[K + k] = tail_l[k, 1]

    es_u = np.full(K, ERASED, dtype=np.int8)
    ep_u = np.full(K, ERASED, dtype=np.int8)
    le_l = np.full(K, ERASED, dtype=np.int8)
    ep_l = np.full(K, ERASED, dtype=np.int8)
    alpha = np.zeros(T + 1, dtype=np.int64)
    beta = np.zeros(T + 1, dtype=np.int64)
    sext = np.empty(T, dtype=np.int8)
    pext = np.empty(T, dtype=np.int8)

    it = 0
    while True:
        for i in range(K):
            x = _merge(base[i], le_l[i])
            if x == CONFLICT:
                return -2
            sys_u[i] = x
        st = _bcjr_kernel(next_state, parity_out, sys_u, par_u, 1, 1, alpha, beta, sext, pext)
        if st >= 0:
            return st
        changed = False
        for i in range(K):
            if sext[i] != es_u[i] or pext[i] != ep_u[i]:
                changed = True
            es_u[i] = sext[i]
            ep_u[i] = pext[i]

        for i in range(K):
            j = perm[i]
            x = _merge(base[j], es_u[j])
            if x == CONFLICT:
                return -2
            sys_l[i] = x
        st = _bcjr_kernel(next_state, parity_out, sys_l, par_l, 1, 1, alpha, beta, sext, pext)
        if st >= 0:
            return st
        for i in range(K):
            j = perm[i]
            if sext[i] != le_l[j] or pext[i] != ep_l[i]:
                changed = True
            le_l[j] = sext[i]
            ep_l[i] = pext[i]

        it += 1
        if not changed or (max_iter > 0 and it >= max_iter):
            break

    for i in range(K):
        x = _merge(es_u[i], le_l[i])
        if x == CONFLICT:
            return -2
        out_sys[i] = x
        out_pu[i] = ep_u[i]
        out_pl[i] = ep_l[i]
    counters[0] = it
    return -1


def turbo_decode(cfg: TurboConfig, channel: TurboExtrinsics, external: TurboExtrinsics | None = None,
                 tail_upper: np.ndarray | None = None, tail_lower: np.ndarray | None = None,
                 iterations: int | None = None) -> tuple[TurboExtrinsics, int]:
    """Iteratief decoderen van één turbo-blok.

    channel: ontvangen symbolen; external: priors van buiten het blok (koppeling).
    Staarten zijn [ν, 2] ternair; None → volledig gewist.
    Geeft (extrinsieke uitvoer, aantal iteraties). De uitvoer op positie i sluit
    zowel de kanaal- als de externe prior op i uit.
    """
    K = cfg.K
    nu = cfg.generator.memory
    external = external or TurboExtrinsics.all_erased(K)
    for name, vec in (("channel", channel), ("external", external)):
        for part in (vec.info, vec.parity_upper, vec.parity_lower):
            if np.shape(part) != (K,):
                raise ConfigError(f"{name}: vector met lengte {np.shape(part)}, verwacht K={K}")
    tails = []
    for tail in (tail_upper, tail_lower):
        tail = np.full((nu, 2), ERASED, dtype=np.int8) if tail is None else np.ascontiguousarray(tail, dtype=np.int8)
        if tail.shape != (nu, 2):
            raise ConfigError(f"staart heeft vorm {tail.shape}, verwacht ({nu}, 2)")
        tails.append(tail)

    budget = iterations if iterations is not None else (cfg.inner_iterations or 0)
    trellis = cfg.trellis
    out = TurboExtrinsics(np.empty(K, np.int8), np.empty(K, np.int8), np.empty(K, np.int8))
    counters = np.zeros(1, dtype=np.int64)
    def c(v):
        return np.ascontiguousarray(v, dtype=np.int8)

    status = _turbo_kernel(trellis.next_state, trellis.parity_out, cfg.interleaver,
                           c(channel.info), c(channel.parity_upper), c(channel.parity_lower),
                           c(external.info), c(external.parity_upper), c(external.parity_lower),
                           tails[0], tails[1], budget,
                           out.info, out.parity_upper, out.parity_lower, counters)
    if status == -2:
        raise InconsistentTraceError("turbo-decoder: tegenstrijdige Known-waarden")
    if status >= 0:
        raise InconsistentTraceError(f"turbo-decoder: geen geldig pad rond positie {status}")
    return out, int(counters[0])
