#!/usr/bin/env python3
"""Recursieve systematische convolutiecode (RSC) + BCJR op het erasure-kanaal.

Op de BEC is elke a-posteriori kans 0, 1 of ½; we rekenen daarom met
ternaire symbolen (Known0, Known1, Erased) en met *verzamelingen* toestanden
(bitmaskers) in plaats van kansen. De kernels draaien onder numba en geven
een statuscode terug; de Python-wrappers zetten die om naar exceptions.

Generatoren in octaal, MSB = coëfficiënt van D^0: (1, 5/7) → feedback 7, feedforward 5.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from functools import lru_cache

import numpy as np
from numba import jit

from turbo.settings import ConfigError, InconsistentTraceError

# ── Ternaire symbolen ─────────────────────────────────────────────────────────

KNOWN0   = 0
KNOWN1   = 1
ERASED   = 2
CONFLICT = 3        # alleen intern: resultaat van _merge bij tegenstrijdigheid

MAX_MEMORY = 5      # toestandsmaskers (2^ν bits) moeten als int64 de kernel in


class Symbol(IntEnum):
    Known0 = KNOWN0
    Known1 = KNOWN1
    Erased = ERASED


def erased(n: int) -> np.ndarray:
    return np.full(n, ERASED, dtype=np.int8)


def known(bits: np.ndarray) -> np.ndarray:
    return np.asarray(bits, dtype=np.int8).copy()


def combine(*vectors: np.ndarray) -> np.ndarray:
    """Known wint van Erased; twee verschillende Known-waarden → InconsistentTraceError."""
    out = np.asarray(vectors[0], dtype=np.int8).copy()
    for vec in vectors[1:]:
        vec = np.asarray(vec, dtype=np.int8)
        clash = (out != ERASED) & (vec != ERASED) & (out != vec)
        if clash.any():
            pos = int(np.flatnonzero(clash)[0])
            raise InconsistentTraceError(f"tegenstrijdige Known-waarden op positie {pos}")
        out = np.where(out == ERASED, vec, out).astype(np.int8)
    return out


# ── Trellis ───────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class GeneratorSpec:
    feedback: int = 0o7
    feedforward: int = 0o5
    memory: int = 2

    def validate(self):
        nu = self.memory
        if not 1 <= nu <= MAX_MEMORY:
            raise ConfigError(f"geheugen ν={nu} buiten 1..{MAX_MEMORY}")
        for name, poly in (("feedback", self.feedback), ("feedforward", self.feedforward)):
            if poly <= 0 or poly >= 1 << (nu + 1):
                raise ConfigError(f"{name} {poly:o} past niet bij ν={nu}")
        if not (self.feedback >> nu) & 1:
            raise ConfigError(f"feedback {self.feedback:o} mist de D^0-term")

    def label(self) -> str:
        return f"1,{self.feedforward:o}/{self.feedback:o}"


@dataclass(frozen=True, eq=False)
class Trellis:
    spec: GeneratorSpec
    next_state: np.ndarray     # [S, 2] int64
    parity_out: np.ndarray     # [S, 2] int8
    tail_input: np.ndarray     # [S] int8: input die de feedback op 0 zet

    @property
    def num_states(self) -> int:
        return self.next_state.shape[0]

    @property
    def memory(self) -> int:
        return self.spec.memory

    @property
    def full_mask(self) -> int:
        return (1 << self.num_states) - 1

    @property
    def prev_branches(self) -> list[list[tuple[int, int]]]:
        """Per toestand de inkomende takken (vorige toestand, input)."""
        prev: list[list[tuple[int, int]]] = [[] for _ in range(self.num_states)]
        for s in range(self.num_states):
            for u in (0, 1):
                prev[int(self.next_state[s, u])].append((s, u))
        return prev


def _taps(poly: int, nu: int) -> list[int]:
    return [(poly >> (nu - k)) & 1 for k in range(nu + 1)]


@lru_cache(maxsize=None)
def build_trellis(spec: GeneratorSpec = GeneratorSpec()) -> Trellis:
    """Toestand s = Σ r_k·2^(k-1); r_1 is het meest recente registerbit."""
    spec.validate()
    nu = spec.memory
    n_states = 1 << nu
    g0 = _taps(spec.feedback, nu)
    g1 = _taps(spec.feedforward, nu)

    next_state = np.zeros((n_states, 2), dtype=np.int64)
    parity_out = np.zeros((n_states, 2), dtype=np.int8)
    tail_input = np.zeros(n_states, dtype=np.int8)
    for s in range(n_states):
        reg = [0] + [(s >> (k - 1)) & 1 for k in range(1, nu + 1)]
        fb = sum(g0[k] * reg[k] for k in range(1, nu + 1)) % 2
        tail_input[s] = fb
        for u in (0, 1):
            w = u ^ fb
            next_state[s, u] = ((s << 1) | w) & (n_states - 1)
            parity_out[s, u] = (g1[0] * w + sum(g1[k] * reg[k] for k in range(1, nu + 1))) % 2
    return Trellis(spec, next_state, parity_out, tail_input)


# ── Encoder ───────────────────────────────────────────────────────────────────

@jit(nopython=True, cache=True)
def _encode_kernel(next_state, parity_out, tail_input, info, n_tail, parity, tail):
    s = 0
    for t in range(info.shape[0]):
        u = info[t]
        parity[t] = parity_out[s, u]
        s = next_state[s, u]
    for t in range(n_tail):
        u = tail_input[s]
        tail[t, 0] = u
        tail[t, 1] = parity_out[s, u]
        s = next_state[s, u]
    return s


def rsc_encode(trellis: Trellis, info: np.ndarray, terminate: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Codeer info vanaf toestand 0. Geeft (pariteit[K], staart[ν, 2] = (sys, par))."""
    info = np.ascontiguousarray(info, dtype=np.int8)
    if info.size and (info.min() < 0 or info.max() > 1):
        raise ConfigError("info moet uit 0/1 bestaan")
    n_tail = trellis.memory if terminate else 0
    parity = np.zeros(info.shape[0], dtype=np.int8)
    tail = np.zeros((n_tail, 2), dtype=np.int8)
    end = _encode_kernel(trellis.next_state, trellis.parity_out, trellis.tail_input,
                         info, n_tail, parity, tail)
    if terminate and end != 0:
        raise InconsistentTraceError(f"terminatie eindigt in toestand {end}")
    return parity, tail


# ── BCJR op de BEC ────────────────────────────────────────────────────────────

@jit(nopython=True, cache=True, inline="always")
def _merge(a, b):
    if a == ERASED:
        return b
    if b == ERASED or a == b:
        return a
    return CONFLICT


@jit(nopython=True, cache=True, inline="always")
def _from_mask(bits):
    # bits: bitmasker over {0, 1}
    if bits == 1:
        return KNOWN0
    if bits == 2:
        return KNOWN1
    return ERASED


@jit(nopython=True, cache=True, nogil=True)
def _bcjr_kernel(next_state, parity_out, sys_prior, par_prior, start_mask, end_mask,
                 alpha, beta, sys_ext, par_ext):
    """Set-BCJR. Status: -1 = ok, anders de eerste positie met een lege verzameling."""
    n = sys_prior.shape[0]
    n_states = next_state.shape[0]

    alpha[0] = start_mask
    for t in range(n):
        a = alpha[t]
        nxt = 0
        su = sys_prior[t]
        pv = par_prior[t]
        for s in range(n_states):
            if (a >> s) & 1:
                for u in range(2):
                    if su != ERASED and su != u:
                        continue
                    v = parity_out[s, u]
                    if pv != ERASED and pv != v:
                        continue
                    nxt |= 1 << next_state[s, u]
        if nxt == 0:
            return t
        alpha[t + 1] = nxt

    if (alpha[n] & end_mask) == 0:
        return n
    beta[n] = end_mask
    for t in range(n - 1, -1, -1):
        b = beta[t + 1]
        prev = 0
        su = sys_prior[t]
        pv = par_prior[t]
        for s in range(n_states):
            for u in range(2):
                if su != ERASED and su != u:
                    continue
                v = parity_out[s, u]
                if pv != ERASED and pv != v:
                    continue
                if (b >> next_state[s, u]) & 1:
                    prev |= 1 << s
                    break
        if prev == 0:
            return t
        beta[t] = prev

    for t in range(n):
        a = alpha[t]
        b = beta[t + 1]
        su = sys_prior[t]
        pv = par_prior[t]
        u_seen = 0
        v_seen = 0
        for s in range(n_states):
            if not (a >> s) & 1:
                continue
            for u in range(2):
                if not (b >> next_state[s, u]) & 1:
                    continue
                v = parity_out[s, u]
                if pv == ERASED or pv == v:
                    u_seen |= 1 << u
                if su == ERASED or su == u:
                    v_seen |= 1 << v
        if u_seen == 0 or v_seen == 0:
            return t
        sys_ext[t] = _from_mask(u_seen)
        par_ext[t] = _from_mask(v_seen)
    return -1


def bcjr_erasure_decode(trellis: Trellis, sys_prior: np.ndarray, par_prior: np.ndarray,
                        start_known: bool = True, end_known: bool = False
                        ) -> tuple[np.ndarray, np.ndarray]:
    """Extrinsieke info voor systematische en pariteitsbits.

    sys_prior/par_prior zijn ternaire int8-vectoren van gelijke lengte (inclusief
    eventuele staartposities). De extrinsieke waarde op positie t negeert de
    eigen prior op t maar gebruikt alle andere priors.
    """
    sys_prior = np.ascontiguousarray(sys_prior, dtype=np.int8)
    par_prior = np.ascontiguousarray(par_prior, dtype=np.int8)
    if sys_prior.shape != par_prior.shape:
        raise ConfigError(f"lengtes verschillen: sys={sys_prior.shape} par={par_prior.shape}")
    n = sys_prior.shape[0]
    alpha = np.zeros(n + 1, dtype=np.int64)
    beta = np.zeros(n + 1, dtype=np.int64)
    sys_ext = np.empty(n, dtype=np.int8)
    par_ext = np.empty(n, dtype=np.int8)
    start = 1 if start_known else trellis.full_mask
    end = 1 if end_known else trellis.full_mask
    status = _bcjr_kernel(trellis.next_state, trellis.parity_out, sys_prior, par_prior,
                          start, end, alpha, beta, sys_ext, par_ext)
    if status >= 0:
        raise InconsistentTraceError(f"BCJR: geen geldig pad rond positie {status}")
    return sys_ext, par_ext
