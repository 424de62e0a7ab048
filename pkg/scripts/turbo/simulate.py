#!/usr/bin/env python3
"""Monte-Carlo BER-metingen op de BEC voor gekoppelde turbo-ketens.

Per ε worden ketens in vaste batches gesimuleerd tot er genoeg fout-events
zijn of het maximum aantal ketens bereikt is. Elke keten heeft eigen random
streams (seed, ε-index, keten, rol), dus de uitkomst hangt niet af van het
aantal threads.
"""

from __future__ import annotations

import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from tqdm import tqdm

from turbo import rng
from turbo.chain_decode import MAX_OUTER, ff_fb_decode, window_decode
from turbo.coupling import ChainCodeword, CouplingConfig, chain_encode, info_length, rate_of
from turbo.settings import ConfigError, InconsistentTraceError, config_header, worker_count
from turbo.trellis import ERASED

# ── Configuratie ──────────────────────────────────────────────────────────────

BATCH_CHAINS = 8        # vaste batchgrootte: stopcriterium onafhankelijk van threads
MIN_ERRORS   = 50
MAX_CHAINS   = 10_000

CSV_COLUMNS = ["eps", "rate", "family", "lambda", "m", "rho", "decoder", "W",
               "bits", "errors", "ber", "chains", "seconds"]


@dataclass
class ExperimentSpec:
    cfg: CouplingConfig
    eps: list[float]
    decoder: str = "ff-fb"
    window: int | None = None
    window_iterations: int | None = None
    max_outer: int = MAX_OUTER
    min_errors: int = MIN_ERRORS
    max_chains: int = MAX_CHAINS
    seed: int = 0

    def __post_init__(self):
        if self.decoder not in {"ff-fb", "window"}:
            raise ConfigError(f"onbekende decoder: {self.decoder!r}")
        if self.decoder == "window" and (self.window is None or self.window < self.cfg.m + 1):
            raise ConfigError(f"window-decoder vereist W ≥ m+1 = {self.cfg.m + 1}")
        if any(not 0 <= e <= 1 for e in self.eps):
            raise ConfigError("ε moet in [0, 1] liggen")
        if self.cfg.K is None or self.cfg.L is None:
            raise ConfigError("simulatie vereist K en L")
        if self.max_chains < 1:
            raise ConfigError("max_chains moet ≥ 1 zijn")


@dataclass
class BERRecord:
    eps: float
    bits: int
    errors: int
    ber: float
    chains: int
    seconds: float


def bec_transmit(codeword: ChainCodeword, eps: float, gen: np.random.Generator) -> np.ndarray:
    """Ternair ontvangen spoor per variabele; gepunctureerde bits komen als Erased binnen."""
    erased = codeword.punctured | (gen.random(codeword.bits.shape[0]) < eps)
    return np.where(erased, ERASED, codeword.bits).astype(np.int8)


def simulate_chain(spec: ExperimentSpec, eps_index: int, chain: int) -> tuple[int, int]:
    """Eén keten: coderen, verzenden, decoderen. Geeft (infobits, gewiste infobits)."""
    eps = spec.eps[eps_index]
    seed = rng.chain_seed(spec.seed, eps_index)
    info = rng.stream(seed, chain, 0, rng.INFO).integers(0, 2, info_length(spec.cfg), dtype=np.int8)
    cw = chain_encode(spec.cfg, info, seed, chain)
    rx = bec_transmit(cw, eps, rng.stream(seed, chain, 0, rng.CHANNEL))
    if spec.decoder == "window":
        res = window_decode(cw.layout, rx, spec.window, spec.window_iterations, spec.max_outer)
    else:
        res = ff_fb_decode(cw.layout, rx, spec.max_outer)
    known = res.info != ERASED
    if np.any(res.info[known] != info[known]):
        raise InconsistentTraceError(f"keten {chain}: gedecodeerd bit wijkt af van verzonden bit")
    return int(info.shape[0]), int((~known).sum())


class BERWriter:
    """CSV die per afgerond ε-punt een regel krijgt."""

    def __init__(self, path: str | Path, spec: ExperimentSpec, config: dict):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.spec = spec
        with self.path.open("w", encoding="utf-8", newline="") as fh:
            for line in config_header(config):
                fh.write(line + "\n")
            pd.DataFrame(columns=CSV_COLUMNS).to_csv(fh, index=False)

    def row(self, rec: BERRecord) -> dict:
        cfg = self.spec.cfg
        return {
            "eps": rec.eps, "rate": float(rate_of(cfg)), "family": cfg.family.value,
            "lambda": str(cfg.lam), "m": cfg.m, "rho": str(cfg.rho), "decoder": self.spec.decoder,
            "W": self.spec.window or "", "bits": rec.bits, "errors": rec.errors, "ber": rec.ber,
            "chains": rec.chains, "seconds": round(rec.seconds, 3),
        }

    def append(self, rec: BERRecord):
        with self.path.open("a", encoding="utf-8", newline="") as fh:
            pd.DataFrame([self.row(rec)], columns=CSV_COLUMNS).to_csv(fh, index=False, header=False, float_format="%.6g")


def run_ber(spec: ExperimentSpec, threads: int | None = None, writer: BERWriter | None = None,
            progress: bool = False) -> list[BERRecord]:
    records: list[BERRecord] = []
    with ThreadPoolExecutor(max_workers=worker_count(threads)) as ex:
        for idx, eps in enumerate(spec.eps):
            start = time.perf_counter()
            bits = errors = chains = 0
            bar = tqdm(total=spec.min_errors, desc=f"ε={eps:.4f}", disable=not progress, leave=False)
            while errors < spec.min_errors and chains < spec.max_chains:
                batch = range(chains, min(chains + BATCH_CHAINS, spec.max_chains))
                for b, e in ex.map(lambda c: simulate_chain(spec, idx, c), batch):
                    bits += b
                    errors += e
                chains = batch.stop
                bar.update(min(errors, spec.min_errors) - bar.n)
            bar.close()
            rec = BERRecord(eps, bits, errors, errors / bits if bits else 0.0, chains, time.perf_counter() - start)
            print(f"[ber] ε={eps:.4f} BER={rec.ber:.3e} ({errors}/{bits}, {chains} ketens, {rec.seconds:.1f}s)",
                  file=sys.stderr)
            records.append(rec)
            if writer is not None:
                writer.append(rec)
    return records


def records_frame(records: list[BERRecord]) -> pd.DataFrame:
    return pd.DataFrame([asdict(r) for r in records])


def write_plot_script(csv_path: str | Path, threshold: float | None = None, title: str = "") -> Path:
    """gnuplot-script naast de CSV: BER tegen ε op log-schaal."""
    csv_path = Path(csv_path)
    gp = csv_path.with_suffix(csv_path.suffix + ".gp")
    lines = [
        "set datafile separator ','",
        "set datafile commentschars '#'",
        "set key autotitle columnhead",
        "set logscale y",
        "set xlabel 'erasure probability'",
        "set ylabel 'BER'",
        "set grid",
    ]
    if title:
        lines.append(f"set title '{title}'")
    if threshold is not None:
        lines.append(f"set arrow from {threshold},graph 0 to {threshold},graph 1 nohead dashtype 2")
    lines.append(f"plot '{csv_path.name}' using 1:11 with linespoints title 'BER'")
    gp.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return gp
