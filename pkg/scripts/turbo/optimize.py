#!/usr/bin/env python3
"""Gezamenlijke keuze van (λ, ρ) bij vaste doelrate: maximaliseer ε_BP.

Voor elke λ ligt ρ vast via R = (1−λ)/((1−λ) + (1/R₀−1)·ρ). We lopen een
grof λ-rooster af, verfijnen rond de beste waarde en rapporteren het
gelijkspel-interval (drempels binnen de bisectietolerantie).
"""

from __future__ import annotations

import sys
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from fractions import Fraction

import pandas as pd
from tqdm import tqdm

from turbo.coupling import CouplingConfig, Family, R0, rate_of, rho_for_rate
from turbo.density import Transfer, threshold_bisect
from turbo.settings import ConfigError, worker_count


@dataclass
class SearchSpec:
    family: Family
    rate: Fraction
    m: int = 1
    lam_min: Fraction = Fraction(0)
    lam_max: Fraction | None = None
    lam_step: Fraction = Fraction(1, 100)
    refine_step: Fraction | None = Fraction(1, 500)
    tol: float = 1e-4
    r0: Fraction = R0

    def __post_init__(self):
        self.family = Family(str(getattr(self.family, "value", self.family)).upper())
        self.rate = Fraction(self.rate)
        if self.lam_max is None:
            self.lam_max = Fraction(1, 2) if self.family is Family.PIC else Fraction(99, 100)
        if not 0 < self.rate < 1:
            raise ConfigError(f"doelrate {self.rate} buiten (0, 1)")
        if self.lam_step <= 0:
            raise ConfigError("lambda_step moet positief zijn")


@dataclass
class SearchResult:
    best_lam: Fraction
    rho: Fraction
    eps_bp: float
    tie_low: Fraction
    tie_high: Fraction
    curve: pd.DataFrame = field(repr=False)


def _config(spec: SearchSpec, lam: Fraction) -> CouplingConfig | None:
    rho = rho_for_rate(spec.rate, lam, spec.r0)
    if not 0 < rho <= 1:
        return None
    try:
        cfg = CouplingConfig(spec.family, lam, spec.m, rho=rho)
    except ConfigError:
        return None
    if rate_of(cfg, asymptotic=True) != spec.rate and spec.r0 == R0:
        raise ConfigError(f"rate-identiteit geschonden bij λ={lam}")
    return cfg


def _grid(lo: Fraction, hi: Fraction, step: Fraction) -> list[Fraction]:
    n = int((hi - lo) / step)
    return [lo + k * step for k in range(n + 1)]


def _evaluate(spec: SearchSpec, lams: list[Fraction], transfer: Transfer, threads: int,
              progress: bool, stage: str) -> list[dict]:
    cfgs = {lam: cfg for lam in lams if (cfg := _config(spec, lam)) is not None}
    rows: list[dict] = []
    with ThreadPoolExecutor(max_workers=worker_count(threads)) as ex:
        futures = {ex.submit(threshold_bisect, cfg, transfer, spec.tol): lam for lam, cfg in cfgs.items()}
        for future in tqdm(as_completed(futures), total=len(futures), desc=stage, disable=not progress, leave=False):
            lam = futures[future]
            try:
                res = future.result()
            except Exception as e:
                print(f"[warn] λ={lam}: drempel mislukt — {e}", file=sys.stderr)
                continue
            rows.append({"lambda": lam, "rho": cfgs[lam].rho, "eps_bp": res.eps_bp, "stage": stage})
    rows.sort(key=lambda r: r["lambda"])
    return rows


def _check_unimodal(rows: list[dict], tol: float):
    values = [r["eps_bp"] for r in rows]
    falling = False
    for prev, cur in zip(values, values[1:]):
        if cur < prev - tol:
            falling = True
        elif falling and cur > prev + tol:
            print("[warn] λ→ε_BP curve is niet unimodaal", file=sys.stderr)
            return


def tie_run(rows: list[dict], tol: float) -> list[dict]:
    """Aaneengesloten rij (op λ gesorteerd) rond het maximum met ε_BP ≥ top − tol."""
    peak = max(range(len(rows)), key=lambda i: rows[i]["eps_bp"])
    floor = rows[peak]["eps_bp"] - tol
    lo = hi = peak
    while lo > 0 and rows[lo - 1]["eps_bp"] >= floor:
        lo -= 1
    while hi < len(rows) - 1 and rows[hi + 1]["eps_bp"] >= floor:
        hi += 1
    return rows[lo:hi + 1]


def joint_search(spec: SearchSpec, transfer: Transfer, threads: int | None = None,
                 progress: bool = False) -> SearchResult:
    coarse = _evaluate(spec, _grid(spec.lam_min, spec.lam_max, spec.lam_step), transfer, threads, progress, "grof")
    if not coarse:
        raise ConfigError(f"geen haalbare λ voor rate {spec.rate} in [{spec.lam_min}, {spec.lam_max}]")
    _check_unimodal(coarse, spec.tol)
    rows = list(coarse)

    if spec.refine_step:
        best = max(rows, key=lambda r: r["eps_bp"])["lambda"]
        lo = max(spec.lam_min, best - spec.lam_step)
        hi = min(spec.lam_max, best + spec.lam_step)
        seen = {r["lambda"] for r in rows}
        fine = [lam for lam in _grid(lo, hi, spec.refine_step) if lam not in seen]
        rows += _evaluate(spec, fine, transfer, threads, progress, "fijn")

    rows.sort(key=lambda r: r["lambda"])
    ties = tie_run(rows, spec.tol)
    best = ties[0]
    for r in rows:
        print(f"[optimize] λ={str(r['lambda']):>7} ρ={float(r['rho']):.4f} ε_BP={r['eps_bp']:.4f}", file=sys.stderr)

    curve = pd.DataFrame({
        "lambda": [float(r["lambda"]) for r in rows],
        "lambda_exact": [str(r["lambda"]) for r in rows],
        "rho": [float(r["rho"]) for r in rows],
        "eps_bp": [r["eps_bp"] for r in rows],
        "stage": [r["stage"] for r in rows],
    })
    return SearchResult(best["lambda"], best["rho"], best["eps_bp"],
                        ties[0]["lambda"], ties[-1]["lambda"], curve)
