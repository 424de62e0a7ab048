#!/usr/bin/env python3
"""Density evolution (DE) voor PIC- en PPC-ketens op de BEC.

Per blok t volgen we vier wiskansen: p_U, p_L (extrinsiek info, upper/lower
decoder) en q_U, q_L (extrinsiek pariteit). Posities buiten 1..L lezen als 0:
zero padding en terminatie maken die bits bekend. Een iteratie werkt eerst
de upper decoder bij en daarna de lower (serieel), of beide vanuit de vorige
iteratie (parallel).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_trapezoid

from turbo.coupling import CouplingConfig, Family, R0, rate_of
from turbo.settings import ConfigError

# ── Configuratie ──────────────────────────────────────────────────────────────

DELTA_CONV  = 1e-8      # geconvergeerd als max_t p_u onder deze grens zakt
STALL_FLOOR = 1e-12     # mislukt als de grootste afname per iteratie kleiner is
MAX_ITER    = 20000     # golffront moet L/2 blokken afleggen vlak onder de drempel
MIN_TOL     = 1e-5

Transfer = Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]


@dataclass
class DEChainState:
    p_u: np.ndarray
    p_l: np.ndarray
    q_u: np.ndarray
    q_l: np.ndarray
    iteration: int = 0

    @classmethod
    def all_erased(cls, L: int) -> "DEChainState":
        return cls(np.ones(L), np.ones(L), np.ones(L), np.ones(L))

    @property
    def L(self) -> int:
        return self.p_u.shape[0]

    def a_posteriori(self, eps: float) -> np.ndarray:
        return eps * self.p_l * self.p_u


@dataclass
class DEResult:
    converged: bool
    state: DEChainState
    iterations: int
    max_p_u: float


@dataclass
class ThresholdResult:
    eps_bp: float
    low: float
    high: float
    rate: Fraction
    gap: float              # 1 − R − ε_BP (asymptotische rate)
    runs: int
    iterations: int         # DE-iteraties van de laatste geconvergeerde run


def de_length(m: int) -> int:
    return 100 if m <= 15 else 10 * m


def _back(x: np.ndarray, m: int) -> np.ndarray:
    """Σ_{j=1..m} x[t−j] met nullen buiten de keten."""
    L = x.shape[0]
    xp = np.pad(x, m)
    return sum(xp[m - j:m - j + L] for j in range(1, m + 1))


def _fwd(x: np.ndarray, m: int) -> np.ndarray:
    """Σ_{j=1..m} x[t+j] met nullen buiten de keten."""
    L = x.shape[0]
    xp = np.pad(x, m)
    return sum(xp[m + j:m + j + L] for j in range(1, m + 1))


def de_step_pic(state: DEChainState, eps: float, lam: float, m: int, rho: float,
                transfer: Transfer, schedule: str = "serial") -> DEChainState:
    lam = float(lam)
    eps_rho = 1.0 - (1.0 - eps) * float(rho)
    w = lam / m
    p_u, p_l = state.p_u, state.p_l

    prod = p_u * p_l
    pbar_l = eps * p_l * (w * (_back(prod, m) + _fwd(prod, m)) + 1.0 - 2.0 * lam)
    p_u_new, q_u_new = transfer(pbar_l, eps_rho)

    upper = p_u_new if schedule == "serial" else p_u
    prod = upper * p_l
    pbar_u = eps * upper * (w * (_back(prod, m) + _fwd(prod, m)) + 1.0 - 2.0 * lam)
    p_l_new, q_l_new = transfer(pbar_u, eps_rho)
    return DEChainState(p_u_new, p_l_new, q_u_new, q_l_new, state.iteration + 1)


def ppc_termination_fraction(L: int, m: int, lam: float) -> np.ndarray:
    """Fractie terminatienullen per blok: min{(t−L+m)λ/m, 1−λ} voor t > L−m."""
    t = np.arange(1, L + 1)
    return np.where(t > L - m, np.minimum((t - L + m) * lam / m, 1.0 - lam), 0.0)


def de_step_ppc(state: DEChainState, eps: float, lam_u: float, lam_l: float, m: int, rho: float,
                transfer: Transfer, schedule: str = "serial") -> DEChainState:
    lam_u, lam_l = float(lam_u), float(lam_l)
    eps_rho = 1.0 - (1.0 - eps) * float(rho)
    wu, wl = lam_u / m, lam_l / m
    fresh = 1.0 - lam_u - lam_l - ppc_termination_fraction(state.L, m, lam_u + lam_l)
    p_u, p_l, q_u, q_l = state.p_u, state.p_l, state.q_u, state.q_l

    coupled_in = eps_rho * (wu * _back(q_u, m) + wl * _back(q_l, m)) + eps * fresh
    pbar_l = p_l * coupled_in
    qbar_u = eps_rho * ((1.0 - lam_u) + wu * _fwd(p_l * p_u, m))
    p_u_new, q_u_new = transfer(pbar_l, qbar_u)

    if schedule == "serial":
        upper_p, upper_q = p_u_new, q_u_new
    else:
        upper_p, upper_q = p_u, q_u
    coupled_in = eps_rho * (wu * _back(upper_q, m) + wl * _back(q_l, m)) + eps * fresh
    pbar_u = upper_p * coupled_in
    qbar_l = eps_rho * ((1.0 - lam_l) + wl * _fwd(upper_p * p_l, m))
    p_l_new, q_l_new = transfer(pbar_u, qbar_l)
    return DEChainState(p_u_new, p_l_new, q_u_new, q_l_new, state.iteration + 1)


def de_step(cfg: CouplingConfig, state: DEChainState, eps: float, transfer: Transfer,
            schedule: str = "serial") -> DEChainState:
    if cfg.family is Family.PIC:
        return de_step_pic(state, eps, cfg.lam, cfg.m, cfg.rho, transfer, schedule)
    return de_step_ppc(state, eps, cfg.lam_upper, cfg.lam_lower, cfg.m, cfg.rho, transfer, schedule)


def de_run(cfg: CouplingConfig, eps: float, transfer: Transfer, max_iter: int = MAX_ITER,
           delta: float = DELTA_CONV, stall: float = STALL_FLOOR, length: int | None = None,
           schedule: str = "serial", trace: list | None = None) -> DEResult:
    """DE tot max_t p_u < delta (geconvergeerd) of tot de afname stilvalt (mislukt).

    trace: optionele lijst die max_t p_u per iteratie ontvangt.
    """
    if schedule not in {"serial", "parallel"}:
        raise ConfigError(f"onbekend schema: {schedule!r}")
    state = DEChainState.all_erased(length or de_length(cfg.m))
    prev = state.a_posteriori(eps)
    worst = float(prev.max())
    for _ in range(max_iter):
        state = de_step(cfg, state, eps, transfer, schedule)
        cur = state.a_posteriori(eps)
        worst = float(cur.max())
        if trace is not None:
            trace.append(worst)
        if worst < delta:
            return DEResult(True, state, state.iteration, worst)
        if float((prev - cur).max()) < stall:
            break
        prev = cur
    return DEResult(False, state, state.iteration, worst)


def threshold_bisect(cfg: CouplingConfig, transfer: Transfer, tol: float = 1e-4, **run_kwargs) -> ThresholdResult:
    """Bisectie op ε ∈ [0, 1]; geeft het midden van het laatste interval (breedte ≤ tol)."""
    if tol < MIN_TOL:
        raise ConfigError(f"tol={tol} < {MIN_TOL}")
    lo, hi = 0.0, 1.0
    runs, iterations = 0, 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        res = de_run(cfg, mid, transfer, **run_kwargs)
        runs += 1
        if res.converged:
            lo, iterations = mid, res.iterations
        else:
            hi = mid
    eps_bp = 0.5 * (lo + hi)
    rate = rate_of(cfg, asymptotic=True)
    return ThresholdResult(eps_bp, lo, hi, rate, float(1 - rate) - eps_bp, runs, iterations)


# ── MAP-drempel via de area-stelling ──────────────────────────────────────────

@dataclass
class MapResult:
    eps_map: float
    eps_bp: float           # BP-drempel van dezelfde (verkorte) ongekoppelde code
    rate: Fraction
    shortening: Fraction    # s: fractie infoposities op nul
    rho: Fraction
    curve: np.ndarray       # [n, 2] (ε, h(ε))


def shortening_for_rate(rate: Fraction, rho: Fraction = Fraction(1)) -> Fraction:
    """s zodat (1−s)/((1−s)+2ρ) = R; ConfigError als R niet haalbaar is met deze ρ."""
    parity = (1 / R0 - 1) * rho
    kept = parity * rate / (1 - rate)
    if not 0 < kept <= 1:
        raise ConfigError(f"rate {rate} niet haalbaar met ρ={rho} (1−s={kept}); verlaag ρ")
    return 1 - kept


def uncoupled_fixed_points(eps: np.ndarray, transfer: Transfer, kept: float = 1.0, rho: float = 1.0,
                           max_iter: int = MAX_ITER, tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """BP-fixpunt van de (verkorte) turbo-code voor elk ε; geeft (p_U, p_L, q_U)."""
    eps = np.asarray(eps, dtype=float)
    eps_rho = 1.0 - (1.0 - eps) * rho
    p_u = np.ones_like(eps)
    p_l = np.ones_like(eps)
    q_u = np.ones_like(eps)
    for _ in range(max_iter):
        p_u_new, q_u = transfer(kept * eps * p_l, eps_rho)
        p_l_new, _ = transfer(kept * eps * p_u_new, eps_rho)
        change = max(np.abs(p_u_new - p_u).max(), np.abs(p_l_new - p_l).max())
        p_u, p_l = p_u_new, p_l_new
        if change < tol:
            break
    return p_u, p_l, q_u


def map_threshold(rate, transfer: Transfer, rho=Fraction(1), grid_step: float = 5e-4) -> MapResult:
    """ε_MAP uit ∫_{ε_MAP}^1 [R·p(ε) + (1−R)·q(ε)] dε = R (trapezium, van 1 naar beneden)."""
    rate, rho = Fraction(rate).limit_denominator(10**6), Fraction(rho)
    if not 0 < rate < 1:
        raise ConfigError(f"rate {rate} buiten (0, 1)")
    s = shortening_for_rate(rate, rho)
    kept = float(1 - s)
    n = int(round(1.0 / grid_step))
    eps = np.linspace(0.0, 1.0, n + 1)
    p_u, p_l, q_u = uncoupled_fixed_points(eps, transfer, kept, float(rho))
    R = float(rate)
    h = R * p_u * p_l + (1.0 - R) * q_u

    # G[k] = ∫_{eps[k]}^1 h
    area = cumulative_trapezoid(h[::-1], -eps[::-1], initial=0.0)[::-1]
    if area[0] < R:
        raise ConfigError(f"geen wortel: totale oppervlakte {area[0]:.4f} < R={R:.4f}")
    k = int(np.flatnonzero(area >= R)[-1])
    if k == n:
        raise ConfigError("geen wortel binnen het rooster")
    # lineair tussen eps[k] (area ≥ R) en eps[k+1] (area < R)
    frac = (area[k] - R) / (area[k] - area[k + 1])
    eps_map = float(eps[k] + frac * (eps[k + 1] - eps[k]))

    decoded = np.flatnonzero(p_u * p_l * eps < DELTA_CONV)
    eps_bp = float(eps[decoded[-1]]) if decoded.size else 0.0
    return MapResult(eps_map, eps_bp, rate, s, rho, np.column_stack([eps, h]))
