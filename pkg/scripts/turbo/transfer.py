#!/usr/bin/env python3
"""Exacte transferfuncties van de BCJR-decoder op de BEC.

Zonder verlies van algemeenheid is het verzonden codewoord nul. De
voorwaartse toestandsverzameling α_t en de achterwaartse β_{t+1} zijn dan
Markov-ketens op deelverzamelingen van toestanden; hun stationaire verdelingen
geven de kans dat de extrinsieke waarde van een info- (f_p) of pariteitsbit
(f_q) gewist blijft, als functie van de wiskansen p̄ (sys) en q̄ (pariteit).

Omdat DE deze functies duizenden keren per drempel aanroept, wordt een tabel op
een (G+1)² rooster één keer berekend, op schijf bewaard en met een kubische
spline geïnterpoleerd.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.interpolate import RectBivariateSpline
from tqdm import tqdm

from turbo import rng
from turbo.settings import CACHE_DIR, NumericError
from turbo.trellis import ERASED, GeneratorSpec, Trellis, bcjr_erasure_decode, build_trellis, rsc_encode

# ── Configuratie ──────────────────────────────────────────────────────────────

GRID_INTERVALS  = 1024      # roosterstap 1/1024 op [0, 1]²
STATIONARY_TOL  = 1e-12     # max |πM − π| na de lineaire solve
MC_BATCHES      = 100       # batch means voor de standaardfout
MC_BOUNDARY     = 10        # genegeerde posities per kant = 10·ν


# Patroon k = 2·sys_gewist + par_gewist
PATTERNS = ((0, 0), (0, 1), (1, 0), (1, 1))


def _pattern_weights(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """[4, N] kans op elk wispatroon."""
    return np.stack([(p if se else 1 - p) * (q if pe else 1 - q) for se, pe in PATTERNS])


@dataclass
class SubsetChain:
    """Bereikbare deelverzamelingen (bitmaskers) en hun overgangen per wispatroon."""
    masks: np.ndarray           # [n]
    moves: np.ndarray           # [4, n] index van de volgende verzameling

    @property
    def size(self) -> int:
        return self.masks.shape[0]

    def transition(self, weights: np.ndarray) -> np.ndarray:
        """[N, n, n] overgangsmatrices; rijen tellen op tot 1."""
        n = self.size
        M = np.zeros((weights.shape[1], n, n))
        rows = np.arange(n)
        for k in range(4):
            M[:, rows, self.moves[k]] += weights[k][:, None]
        return M

    def stationary(self, p: np.ndarray, q: np.ndarray) -> np.ndarray:
        """[N, n] stationaire verdeling; bij (1−p)(1−q)=0 alle massa op de volle verzameling."""
        N, n = p.shape[0], self.size
        M = self.transition(_pattern_weights(p, q))
        degenerate = (1 - p) * (1 - q) <= 0
        A = np.transpose(M, (0, 2, 1)) - np.eye(n)
        A[:, -1, :] = 1.0
        A[degenerate] = np.eye(n)
        b = np.zeros((N, n))
        b[:, -1] = 1.0
        try:
            pi = np.linalg.solve(A, b[..., None])[..., 0]
        except np.linalg.LinAlgError as e:
            raise NumericError(f"stationaire verdeling: singuliere matrix ({e})") from e
        pi[degenerate] = 0.0
        pi[degenerate, 0] = 1.0          # index 0 = volle verzameling
        resid = np.abs(np.einsum("na,nab->nb", pi, M) - pi).max(axis=1)
        bad = ~degenerate & (resid > STATIONARY_TOL)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise NumericError(f"stationaire verdeling onnauwkeurig bij p̄={p[i]:.6g}, q̄={q[i]:.6g}: {resid[i]:.2e}")
        pi = np.clip(pi, 0.0, None)
        return pi / pi.sum(axis=1, keepdims=True)


def _branches(trellis: Trellis, se: int, pe: int):
    """Takken (s, u, v, s') die het patroon toelaat bij het nulcodewoord."""
    for s in range(trellis.num_states):
        for u in (0, 1):
            v = int(trellis.parity_out[s, u])
            if (se or u == 0) and (pe or v == 0):
                yield s, u, v, int(trellis.next_state[s, u])


def _forward_move(trellis: Trellis, mask: int, se: int, pe: int) -> int:
    out = 0
    for s, _, _, nxt in _branches(trellis, se, pe):
        if (mask >> s) & 1:
            out |= 1 << nxt
    return out


def _backward_move(trellis: Trellis, mask: int, se: int, pe: int) -> int:
    out = 0
    for s, _, _, nxt in _branches(trellis, se, pe):
        if (mask >> nxt) & 1:
            out |= 1 << s
    return out


def subset_chain(trellis: Trellis, backward: bool = False) -> SubsetChain:
    """Breadth-first vanaf de volle verzameling; index 0 is altijd de volle verzameling."""
    move = _backward_move if backward else _forward_move
    masks = [trellis.full_mask]
    index = {trellis.full_mask: 0}
    moves: list[list[int]] = [[] for _ in PATTERNS]
    i = 0
    while i < len(masks):
        for k, (se, pe) in enumerate(PATTERNS):
            nxt = move(trellis, masks[i], se, pe)
            if nxt == 0:
                raise NumericError(f"lege toestandsverzameling vanuit {masks[i]:b}")
            if nxt not in index:
                index[nxt] = len(masks)
                masks.append(nxt)
            moves[k].append(index[nxt])
        i += 1
    return SubsetChain(np.asarray(masks, dtype=np.int64), np.asarray(moves, dtype=np.int64))


class ExactTransfer:
    """Exacte f_p, f_q via de stationaire verdelingen van beide ketens."""

    def __init__(self, trellis: Trellis):
        self.trellis = trellis
        self.fwd = subset_chain(trellis)
        self.bwd = subset_chain(trellis, backward=True)
        # E_p[pe][a, b]: beide u-waarden mogelijk tussen α=a en β=b; E_q[se] idem voor v
        nf, nb = self.fwd.size, self.bwd.size
        self.e_p = np.zeros((2, nf, nb))
        self.e_q = np.zeros((2, nf, nb))
        for a, amask in enumerate(self.fwd.masks):
            for b, bmask in enumerate(self.bwd.masks):
                for flag in (0, 1):
                    us, vs = set(), set()
                    for s, u, v, nxt in _branches(trellis, 1, flag):
                        if (amask >> s) & 1 and (bmask >> nxt) & 1:
                            us.add(u)
                    for s, u, v, nxt in _branches(trellis, flag, 1):
                        if (amask >> s) & 1 and (bmask >> nxt) & 1:
                            vs.add(v)
                    self.e_p[flag, a, b] = len(us) == 2
                    self.e_q[flag, a, b] = len(vs) == 2

    def evaluate(self, p, q) -> tuple[np.ndarray, np.ndarray]:
        p, q = np.broadcast_arrays(np.asarray(p, dtype=float), np.asarray(q, dtype=float))
        shape = p.shape
        p, q = np.clip(p.ravel(), 0, 1), np.clip(q.ravel(), 0, 1)
        pf = self.fwd.stationary(p, q)
        pb = self.bwd.stationary(p, q)
        tp = q[:, None, None] * self.e_p[1] + (1 - q)[:, None, None] * self.e_p[0]
        tq = p[:, None, None] * self.e_q[1] + (1 - p)[:, None, None] * self.e_q[0]
        fp = np.einsum("na,nab,nb->n", pf, tp, pb)
        fq = np.einsum("na,nab,nb->n", pf, tq, pb)
        return np.clip(fp, 0, 1).reshape(shape), np.clip(fq, 0, 1).reshape(shape)


def exact_transfer(p, q, spec: GeneratorSpec = GeneratorSpec()) -> tuple[np.ndarray, np.ndarray]:
    return _exact(spec).evaluate(p, q)


@lru_cache(maxsize=None)
def _exact(spec: GeneratorSpec) -> ExactTransfer:
    return ExactTransfer(build_trellis(spec))


class TransferFunction:
    """Getabelleerde f_p/f_q met kubische spline-interpolatie."""

    def __init__(self, spec: GeneratorSpec, table_p: np.ndarray, table_q: np.ndarray):
        G = table_p.shape[0] - 1
        self.spec = spec
        self.grid = np.linspace(0.0, 1.0, G + 1)
        self.table_p = table_p
        self.table_q = table_q
        self._sp = RectBivariateSpline(self.grid, self.grid, table_p, kx=3, ky=3, s=0)
        self._sq = RectBivariateSpline(self.grid, self.grid, table_q, kx=3, ky=3, s=0)

    @classmethod
    def build(cls, spec: GeneratorSpec = GeneratorSpec(), intervals: int = GRID_INTERVALS,
              progress: bool = False) -> "TransferFunction":
        exact = _exact(spec)
        grid = np.linspace(0.0, 1.0, intervals + 1)
        table_p = np.empty((intervals + 1, intervals + 1))
        table_q = np.empty_like(table_p)
        for i in tqdm(range(intervals + 1), desc="transfer", disable=not progress, leave=False):
            table_p[i], table_q[i] = exact.evaluate(np.full_like(grid, grid[i]), grid)
        return cls(spec, table_p, table_q)

    def f_p(self, p, q) -> np.ndarray:
        p, q = np.broadcast_arrays(np.asarray(p, dtype=float), np.asarray(q, dtype=float))
        return np.clip(self._sp.ev(p, q), 0.0, 1.0)

    def f_q(self, p, q) -> np.ndarray:
        p, q = np.broadcast_arrays(np.asarray(p, dtype=float), np.asarray(q, dtype=float))
        return np.clip(self._sq.ev(p, q), 0.0, 1.0)

    def __call__(self, p, q) -> tuple[np.ndarray, np.ndarray]:
        return self.f_p(p, q), self.f_q(p, q)

    def exact(self, p, q) -> tuple[np.ndarray, np.ndarray]:
        return _exact(self.spec).evaluate(p, q)

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savez_compressed(path, table_p=self.table_p, table_q=self.table_q,
                            spec=np.array([self.spec.feedback, self.spec.feedforward, self.spec.memory]))
        return path

    @classmethod
    def load(cls, path: str | Path) -> "TransferFunction":
        with np.load(path) as data:
            fb, ff, nu = (int(x) for x in data["spec"])
            return cls(GeneratorSpec(fb, ff, nu), data["table_p"], data["table_q"])


def cache_file(spec: GeneratorSpec, intervals: int, cache_dir: Path | None = None) -> Path:
    return Path(cache_dir or CACHE_DIR) / f"transfer_{spec.feedback:o}_{spec.feedforward:o}_{spec.memory}_{intervals}.npz"


@lru_cache(maxsize=8)
def load_transfer(spec: GeneratorSpec = GeneratorSpec(), intervals: int = GRID_INTERVALS,
                  cache_dir: Path | None = None, progress: bool = False) -> TransferFunction:
    """Tabel uit de cache of opnieuw opbouwen (en opslaan)."""
    path = cache_file(spec, intervals, cache_dir)
    if path.exists():
        try:
            tf = TransferFunction.load(path)
            if tf.spec == spec and tf.table_p.shape == (intervals + 1, intervals + 1):
                return tf
            print(f"[warn] cache {path.name} past niet bij {spec.label()} — opnieuw opbouwen", file=sys.stderr)
        except Exception as e:
            print(f"[warn] cache {path.name} onleesbaar ({e}) — opnieuw opbouwen", file=sys.stderr)
    print(f"[transfer] tabel {spec.label()} op {intervals + 1}² rooster opbouwen...", file=sys.stderr)
    tf = TransferFunction.build(spec, intervals, progress)
    try:
        tf.save(path)
    except OSError as e:
        print(f"[warn] cache niet geschreven: {e}", file=sys.stderr)
    return tf


@dataclass
class MonteCarloTransfer:
    f_p: float
    f_q: float
    stderr_p: float
    stderr_q: float
    samples: int


def mc_transfer(p: float, q: float, samples: int = 10**6, seed: int = 0,
                spec: GeneratorSpec = GeneratorSpec()) -> MonteCarloTransfer:
    """Schat f_p, f_q met één lange BCJR-run op een willekeurig codewoord.

    De rand (10·ν posities per kant) telt niet mee; de standaardfout komt uit
    batch means omdat opeenvolgende posities gecorreleerd zijn.
    """
    trellis = build_trellis(spec)
    boundary = MC_BOUNDARY * spec.memory
    n = samples + 2 * boundary
    gen = rng.stream(seed, 0, 0, rng.CHANNEL)
    info = gen.integers(0, 2, n, dtype=np.int8)
    parity, _ = rsc_encode(trellis, info, terminate=False)
    sys_rx = np.where(gen.random(n) < p, ERASED, info).astype(np.int8)
    par_rx = np.where(gen.random(n) < q, ERASED, parity).astype(np.int8)
    sys_ext, par_ext = bcjr_erasure_decode(trellis, sys_rx, par_rx, start_known=True, end_known=False)
    ep = (sys_ext[boundary:n - boundary] == ERASED).astype(float)
    eq = (par_ext[boundary:n - boundary] == ERASED).astype(float)
    batches = min(MC_BATCHES, samples)
    usable = (samples // batches) * batches
    mp = ep[:usable].reshape(batches, -1).mean(axis=1)
    mq = eq[:usable].reshape(batches, -1).mean(axis=1)
    return MonteCarloTransfer(float(ep.mean()), float(eq.mean()), _stderr(mp), _stderr(mq), int(ep.shape[0]))


def _stderr(batch_means: np.ndarray) -> float:
    if batch_means.shape[0] < 2:
        return 0.0
    return float(batch_means.std(ddof=1) / np.sqrt(batch_means.shape[0]))
