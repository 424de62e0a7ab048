#!/usr/bin/env python3
"""
Coupled Turbo CLI — PIC/PPC spatially coupled turbo-codes op de BEC

Subcommands:
  threshold      BP-drempel via density evolution (één of meer m)
  optimize       Gezamenlijke (λ, ρ)-keuze bij vaste rate
  ber            Monte-Carlo BER-sweep over ε (CSV + gnuplot-script)
  transfer       Exacte transferfuncties f_p, f_q (rooster of één punt)
  map-threshold  MAP-drempel van de (verkorte/gepunctureerde) turbo-code
  awgn           BEC-drempel omzetten naar σ* en Eb/N0
  roundtrip      Eén keten coderen, verzenden, decoderen (optioneel .pct opslaan/afspelen)

Gebruik:
  python3 scripts/coupled_turbo.py threshold --family pic --lambda 1/2 --m 1
  python3 scripts/coupled_turbo.py threshold --family pic --lambda 1/8 --m 1,2,5,10
  python3 scripts/coupled_turbo.py optimize --family ppc --rate 2/3 --m 1
  python3 scripts/coupled_turbo.py ber --family pic --lambda 1/2 --K 1000 --L 20 --eps 0.70:0.80:0.02
  python3 scripts/coupled_turbo.py transfer --p 0.5 --q 0.5 --samples 1000000
  python3 scripts/coupled_turbo.py map-threshold --rate 0.3043
  python3 scripts/coupled_turbo.py awgn --eps 0.6576 --rate 1/3
  python3 scripts/coupled_turbo.py roundtrip --family ppc --lambda 1/4 --K 1000 --L 10 --eps 0.5 --save chain.pct

Alle flags kunnen ook in een key=value bestand staan (--config run.cfg); CLI wint.

Optionele env vars:
  COUPLED_TURBO_THREADS, COUPLED_TURBO_CACHE, COUPLED_TURBO_REPORTS
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from pathlib import Path

import numpy as np
import pandas as pd

# Zorg dat scripts/turbo/ importeerbaar is
sys.path.insert(0, str(Path(__file__).resolve().parent))

from turbo import rng
from turbo.capacity import awgn_sigma_from_bec
from turbo.chain_decode import MAX_OUTER, ff_fb_decode, window_decode
from turbo.coupling import (
    CouplingConfig,
    build_layout,
    chain_encode,
    info_length,
    rate_of,
    read_trace,
    write_trace,
)
from turbo.density import MAX_ITER, de_length, map_threshold, threshold_bisect
from turbo.optimize import SearchSpec, joint_search
from turbo.settings import (
    CONFIG_KEYS,
    ConfigError,
    CouplingError,
    output_path,
    read_config_file,
    resolve_config,
    worker_count,
    write_csv,
)
from turbo.simulate import BERWriter, ExperimentSpec, bec_transmit, run_ber, write_plot_script
from turbo.transfer import GRID_INTERVALS, exact_transfer, load_transfer, mc_transfer
from turbo.trellis import ERASED


# ── Config helpers ────────────────────────────────────────────────────────────

def load_config(args) -> dict:
    """Bestand (--config) + flags → getypte config; echo in elke uitvoer."""
    file_values = read_config_file(args.config) if args.config else {}
    overrides = {k: v for k, v in vars(args).items() if k in CONFIG_KEYS}
    return resolve_config(file_values, overrides)


def single_m(conf: dict) -> int:
    ms = conf.get("m", [1])
    if len(ms) != 1:
        raise ConfigError(f"dit commando verwacht één m, kreeg {ms}")
    return ms[0]


def coupling_config(conf: dict, m: int | None = None, chain: bool = False) -> CouplingConfig:
    if chain and ("K" not in conf or "L" not in conf):
        raise ConfigError("--K en --L zijn verplicht voor dit commando")
    return CouplingConfig(
        family=conf.get("family", "PIC"),
        lam=conf.get("lambda", Fraction(0)),
        m=m if m is not None else single_m(conf),
        L=conf.get("L") if chain else None,
        K=conf.get("K") if chain else None,
        rho=conf.get("rho", Fraction(1)),
        lam_upper=conf.get("lambda_upper"),
        lam_lower=conf.get("lambda_lower"),
        puncture_coupled=conf.get("puncture_coupled", True),
        random_positions=conf.get("random_positions", True),
        inner_iterations=conf.get("inner_iterations"),
        interleaver_file=conf.get("interleaver_file"),
    )


def transfer_for(conf: dict, args):
    return load_transfer(intervals=conf.get("grid", GRID_INTERVALS), progress=args.progress)


# ── Commando's ────────────────────────────────────────────────────────────────

def cmd_threshold(args) -> int:
    """BP-drempel per m; print ε_BP en schrijf CSV."""
    conf = load_config(args)
    tf = transfer_for(conf, args)
    ms = conf.get("m", [1])
    cfgs = [coupling_config(conf, m) for m in ms]
    run_kwargs = {
        "schedule": conf.get("schedule", "serial"),
        "max_iter": conf.get("max_iter", MAX_ITER),
    }
    if "de_length" in conf:
        run_kwargs["length"] = conf["de_length"]
    tol = conf.get("tol", 1e-4)

    with ThreadPoolExecutor(max_workers=min(worker_count(conf.get("threads")), len(cfgs))) as ex:
        results = list(ex.map(lambda c: threshold_bisect(c, tf, tol, **run_kwargs), cfgs))

    rows = []
    for cfg, res in zip(cfgs, results):
        print(f"{cfg.family.value} λ={cfg.lam} m={cfg.m} ρ={cfg.rho}: ε_BP = {res.eps_bp:.4f} "
              f"(R={float(res.rate):.4f}, gap={res.gap:.4f})")
        rows.append({
            "family": cfg.family.value, "lambda": str(cfg.lam),
            "lambda_upper": str(cfg.lam_upper or ""), "lambda_lower": str(cfg.lam_lower or ""),
            "m": cfg.m, "rho": str(cfg.rho), "rate": float(res.rate), "eps_bp": round(res.eps_bp, 6),
            "gap": round(res.gap, 6), "iterations": res.iterations,
            "de_length": run_kwargs.get("length", de_length(cfg.m)),
        })
    path = write_csv(pd.DataFrame(rows), output_path(conf.get("output"), "thresholds.csv"), {"command": "threshold", **conf})
    print(f"[threshold] {len(rows)} regel(s) → {path}", file=sys.stderr)
    return 0


def cmd_optimize(args) -> int:
    """Zoek (λ, ρ) met de hoogste drempel bij de doelrate."""
    conf = load_config(args)
    if "rate" not in conf:
        raise ConfigError("--rate is verplicht")
    spec = SearchSpec(
        family=conf.get("family", "PIC"),
        rate=conf["rate"],
        m=single_m(conf),
        lam_min=conf.get("lambda_min", Fraction(0)),
        lam_max=conf.get("lambda_max"),
        lam_step=conf.get("lambda_step", Fraction(1, 100)),
        refine_step=conf.get("refine_step", Fraction(1, 500)),
        tol=conf.get("tol", 1e-4),
    )
    tf = transfer_for(conf, args)
    res = joint_search(spec, tf, conf.get("threads"), args.progress)
    print(f"{spec.family.value} R={spec.rate} m={spec.m}: λ*={res.best_lam} ({float(res.best_lam):.3f}) "
          f"ρ={float(res.rho):.4f} ε_BP={res.eps_bp:.4f} gelijkspel λ∈[{float(res.tie_low):.3f}, {float(res.tie_high):.3f}]")
    path = write_csv(res.curve, output_path(conf.get("output"), "optimize.csv"), {"command": "optimize", **conf})
    print(f"[optimize] curve → {path}", file=sys.stderr)
    return 0


def cmd_ber(args) -> int:
    """Monte-Carlo BER-sweep; CSV wordt per ε-punt aangevuld."""
    conf = load_config(args)
    if "eps" not in conf:
        raise ConfigError("--eps is verplicht")
    cfg = coupling_config(conf, chain=True)
    spec = ExperimentSpec(
        cfg=cfg,
        eps=conf["eps"],
        decoder=conf.get("decoder", "ff-fb"),
        window=conf.get("window"),
        window_iterations=conf.get("window_iterations"),
        max_outer=conf.get("max_outer", MAX_OUTER),
        min_errors=conf.get("min_errors", 50),
        max_chains=conf.get("max_chains", 10_000),
        seed=conf.get("seed", 0),
    )
    path = output_path(conf.get("output"), "ber.csv")
    print(f"[ber] {cfg.family.value} λ={cfg.lam} m={cfg.m} K={cfg.K} L={cfg.L} R={float(rate_of(cfg)):.4f}",
          file=sys.stderr)
    writer = BERWriter(path, spec, {"command": "ber", **conf})
    run_ber(spec, conf.get("threads"), writer, args.progress)
    gp = write_plot_script(path, conf.get("threshold"), f"{cfg.family.value} λ={cfg.lam} m={cfg.m}")
    print(f"[ber] resultaten → {path} (plot: {gp.name})", file=sys.stderr)
    return 0


def cmd_transfer(args) -> int:
    """Eén punt (exact + optioneel Monte-Carlo) of een CSV-rooster van f_p, f_q."""
    conf = load_config(args)
    if "p" in conf or "q" in conf:
        p, q = conf.get("p", 0.5), conf.get("q", 0.5)
        fp, fq = exact_transfer(p, q)
        print(f"exact   f_p({p}, {q}) = {float(fp):.6f}   f_q = {float(fq):.6f}")
        if "samples" in conf:
            mc = mc_transfer(p, q, conf["samples"], conf.get("seed", 0))
            print(f"MC      f_p = {mc.f_p:.6f} ± {mc.stderr_p:.6f}   f_q = {mc.f_q:.6f} ± {mc.stderr_q:.6f}  (n={mc.samples})")
        return 0
    n = conf.get("points", 20)
    grid = np.linspace(0.0, 1.0, n + 1)
    P, Q = np.meshgrid(grid, grid, indexing="ij")
    fp, fq = exact_transfer(P, Q)
    df = pd.DataFrame({"p": P.ravel(), "q": Q.ravel(), "f_p": fp.ravel(), "f_q": fq.ravel()})
    path = write_csv(df, output_path(conf.get("output"), "transfer.csv"), {"command": "transfer", **conf})
    print(f"[transfer] {len(df)} punten → {path}", file=sys.stderr)
    return 0


def cmd_map_threshold(args) -> int:
    """MAP-drempel via de area-stelling (verkorting voor R < R₀, ρ voor R > R₀)."""
    conf = load_config(args)
    if "rate" not in conf:
        raise ConfigError("--rate is verplicht")
    tf = transfer_for(conf, args)
    res = map_threshold(conf["rate"], tf, conf.get("rho", Fraction(1)), conf.get("grid_step", 5e-4))
    print(f"R={float(res.rate):.4f} s={float(res.shortening):.4f} ρ={res.rho}: "
          f"ε_MAP = {res.eps_map:.4f}  ε_BP = {res.eps_bp:.4f}")
    if conf.get("output"):
        df = pd.DataFrame(res.curve, columns=["eps", "h"])
        path = write_csv(df, output_path(conf["output"], "map_exit.csv"), {"command": "map-threshold", **conf})
        print(f"[map] EXIT-curve → {path}", file=sys.stderr)
    return 0


def cmd_awgn(args) -> int:
    """ε* → σ* en Eb/N0 bij de opgegeven rate."""
    conf = load_config(args)
    if "eps" not in conf or "rate" not in conf:
        raise ConfigError("--eps en --rate zijn verplicht")
    for eps in conf["eps"]:
        res = awgn_sigma_from_bec(eps, float(conf["rate"]))
        print(f"ε*={eps:.4f} R={float(conf['rate']):.4f}: σ* = {res.sigma:.4f}  Eb/N0 = {res.ebn0_db:+.3f} dB")
    return 0


def cmd_roundtrip(args) -> int:
    """Eén keten: coderen → BEC → decoderen; of een opgeslagen spoor opnieuw decoderen."""
    conf = load_config(args)
    if "replay" in conf:
        cfg, received, header = read_trace(conf["replay"])
        seed, chain = header["seed"], header["chain"]
        layout = build_layout(cfg, seed, chain)
        info = None
        print(f"[roundtrip] spoor {conf['replay']} ({cfg.family.value} λ={cfg.lam} K={cfg.K} L={cfg.L})", file=sys.stderr)
    else:
        cfg = coupling_config(conf, chain=True)
        seed = conf.get("seed", 0)
        chain = 0
        eps = conf.get("eps", [0.0])[0]
        info = rng.stream(seed, chain, 0, rng.INFO).integers(0, 2, info_length(cfg), dtype=np.int8)
        cw = chain_encode(cfg, info, seed, chain)
        received = bec_transmit(cw, eps, rng.stream(seed, chain, 0, rng.CHANNEL))
        layout = cw.layout
        print(f"[roundtrip] {cw.n_info} infobits, {cw.n_transmitted} verzonden (R={float(cw.measured_rate()):.4f})",
              file=sys.stderr)
        if "save" in conf:
            path = write_trace(conf["save"], cfg, received, seed, chain, {"eps": eps})
            print(f"[roundtrip] spoor opgeslagen → {path}", file=sys.stderr)

    if conf.get("decoder", "ff-fb") == "window":
        res = window_decode(layout, received, conf.get("window", cfg.m + 1), conf.get("window_iterations"),
                            conf.get("max_outer", MAX_OUTER))
    else:
        res = ff_fb_decode(layout, received, conf.get("max_outer", MAX_OUTER))
    n = res.info.shape[0]
    if info is not None:
        known = res.info != ERASED
        if np.any(res.info[known] != info[known]):
            print("[fout] gedecodeerde bits wijken af van de verzonden bits", file=sys.stderr)
            return 1
    print(f"BER = {res.erased_info / n:.3e} ({res.erased_info}/{n} gewist, {res.sweeps} sweeps)")
    return 0


# ── Argumenten ────────────────────────────────────────────────────────────────

def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key=value configbestand")
    p.add_argument("--output", help="uitvoerbestand (relatief → data/reports/)")
    p.add_argument("--threads", help="aantal worker threads")
    p.add_argument("--seed", help="seed voor alle random streams")
    p.add_argument("--progress", action="store_true", help="toon voortgangsbalken")


def _code(p: argparse.ArgumentParser, chain: bool = False):
    p.add_argument("--family", help="PIC of PPC")
    p.add_argument("--lambda", help="koppelratio λ, bv. 1/4")
    p.add_argument("--lambda-upper", help="PPC: λ^U (default λ/2)")
    p.add_argument("--lambda-lower", help="PPC: λ^L (default λ − λ^U)")
    p.add_argument("--m", help="koppelgeheugen (threshold: lijst toegestaan, bv. 1,2,5)")
    p.add_argument("--rho", help="fractie overlevende pariteit ρ ∈ (0, 1]")
    p.add_argument("--grid", help=f"roosterintervallen transfer-tabel (default {GRID_INTERVALS})")
    if chain:
        p.add_argument("--K", help="infolengte per blok")
        p.add_argument("--L", help="ketenlengte")
        p.add_argument("--puncture-coupled", help="PPC: gekoppelde pariteit ook punctureren (default true)")
        p.add_argument("--random-positions", help="gekoppelde posities per blok willekeurig (default true; false → aaneengesloten)")
        p.add_argument("--interleaver-file", help="vaste interleaver (één index per regel)")
        p.add_argument("--inner-iterations", help="max. turbo-iteraties per blokbezoek (default: tot stilstand)")
        p.add_argument("--decoder", help="ff-fb of window")
        p.add_argument("--window", help="venstergrootte W ≥ m+1")
        p.add_argument("--window-iterations", help="FF-FB sweeps per venster")
        p.add_argument("--max-outer", help=f"max. FF-FB sweeps (default {MAX_OUTER})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="PIC/PPC coupled turbo-codes op de BEC")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("threshold", help="BP-drempel via DE")
    _common(p)
    _code(p)
    p.add_argument("--tol", help="bisectietolerantie (default 1e-4)")
    p.add_argument("--schedule", help="serial (default) of parallel")
    p.add_argument("--de-length", help="DE-ketenlengte (default 100, 10m voor m > 15)")
    p.add_argument("--max-iter", help=f"max. DE-iteraties per run (default {MAX_ITER})")
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("optimize", help="gezamenlijke (λ, ρ)-optimalisatie")
    _common(p)
    _code(p)
    p.add_argument("--rate", help="doelrate, bv. 2/3")
    p.add_argument("--lambda-min", help="ondergrens λ-rooster")
    p.add_argument("--lambda-max", help="bovengrens λ-rooster")
    p.add_argument("--lambda-step", help="stap grof rooster (default 1/100)")
    p.add_argument("--refine-step", help="stap fijn rooster (default 1/500, 0 = geen)")
    p.add_argument("--tol", help="bisectietolerantie (default 1e-4)")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("ber", help="Monte-Carlo BER-sweep")
    _common(p)
    _code(p, chain=True)
    p.add_argument("--eps", help="ε-lijst: 0.7,0.75 of start:stop:stap")
    p.add_argument("--min-errors", help="stop na zoveel gewiste infobits (default 50)")
    p.add_argument("--max-chains", help="max. ketens per ε (default 10000)")
    p.add_argument("--threshold", help="DE-drempel als verticale lijn in de plot")
    p.set_defaults(func=cmd_ber)

    p = sub.add_parser("transfer", help="exacte transferfuncties")
    _common(p)
    p.add_argument("--p", help="p̄ (sys-wiskans) voor één punt")
    p.add_argument("--q", help="q̄ (pariteit-wiskans) voor één punt")
    p.add_argument("--samples", help="Monte-Carlo controle met zoveel posities")
    p.add_argument("--points", help="intervallen per as voor de CSV-dump (default 20)")
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("map-threshold", help="MAP-drempel via area-stelling")
    _common(p)
    p.add_argument("--rate", help="rate van de (verkorte) turbo-code")
    p.add_argument("--rho", help="fractie overlevende pariteit")
    p.add_argument("--grid-step", help="ε-stap voor de integraal (default 5e-4)")
    p.add_argument("--grid", help=f"roosterintervallen transfer-tabel (default {GRID_INTERVALS})")
    p.set_defaults(func=cmd_map_threshold)

    p = sub.add_parser("awgn", help="BEC-drempel → AWGN Eb/N0")
    _common(p)
    p.add_argument("--eps", help="BEC-drempel(s) ε*")
    p.add_argument("--rate", help="coderate")
    p.set_defaults(func=cmd_awgn)

    p = sub.add_parser("roundtrip", help="één keten coderen/decoderen")
    _common(p)
    _code(p, chain=True)
    p.add_argument("--eps", help="wiskans van het kanaal")
    p.add_argument("--save", help="ontvangen spoor opslaan als .pct")
    p.add_argument("--replay", help=".pct-spoor opnieuw decoderen")
    p.set_defaults(func=cmd_roundtrip)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CouplingError, OSError) as e:
        print(f"[fout] {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
