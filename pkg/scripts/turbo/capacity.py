#!/usr/bin/env python3
"""BEC-drempel → AWGN-drempel via gelijke capaciteit: C_G(σ*) = 1 − ε*."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import bisect

from turbo.settings import ConfigError, NumericError

QUAD_EPSABS  = 1e-9
SIGMA_RANGE  = (1e-3, 1e3)
TAIL_SIGMAS  = 12.0         # integratiegrenzen 1 ± 12σ


def biawgn_capacity(sigma: float) -> float:
    """Capaciteit (bits) van het BPSK-AWGN-kanaal met ruis σ."""
    if sigma <= 0:
        raise ConfigError(f"σ moet positief zijn, kreeg {sigma}")
    s2 = sigma * sigma

    def integrand(y: float) -> float:
        density = np.exp(-(y - 1.0) ** 2 / (2 * s2)) / np.sqrt(2 * np.pi * s2)
        return density * np.logaddexp(0.0, -2.0 * y / s2) / np.log(2.0)

    lo, hi = 1.0 - TAIL_SIGMAS * sigma, 1.0 + TAIL_SIGMAS * sigma
    value, err = quad(integrand, lo, hi, epsabs=QUAD_EPSABS, limit=200, points=[0.0] if lo < 0 < hi else None)
    if err > 1e-6:
        raise NumericError(f"capaciteitsintegraal onnauwkeurig bij σ={sigma}: fout {err:.1e}")
    return float(min(max(1.0 - value, 0.0), 1.0))


@dataclass
class AwgnThreshold:
    eps: float
    sigma: float
    rate: float
    ebn0_db: float


def awgn_sigma_from_bec(eps: float, rate: float) -> AwgnThreshold:
    """σ* met C_G(σ*) = 1 − ε en Eb/N0 = 10·log10(1/(2Rσ*²)) in dB (met teken)."""
    if not 0 < eps < 1:
        raise ConfigError(f"ε={eps} buiten (0, 1)")
    if not 0 < rate < 1:
        raise ConfigError(f"rate {rate} buiten (0, 1)")
    target = 1.0 - eps
    sigma = bisect(lambda s: biawgn_capacity(s) - target, *SIGMA_RANGE, xtol=1e-12, maxiter=200)
    ebn0 = 10.0 * np.log10(1.0 / (2.0 * float(rate) * sigma * sigma))
    return AwgnThreshold(float(eps), float(sigma), float(rate), float(ebn0))
