#!/usr/bin/env python3
"""Ketens van L turbo-blokken met koppelgeheugen m: PIC (info) en PPC (pariteit).

Elk bit in de keten is een *variabele* met een globale index. Een blok ziet
zijn componentposities (sys, upper-pariteit, lower-pariteit, staarten) via
indexkaarten; index −1 betekent een vaste nul (zero padding / terminatie).
Gekoppelde bits verschijnen in twee blokken maar worden één keer verzonden.

Wire-formaat voor ontvangen sporen (.pct):
  b"PCTC" | versie (u8) | lengte JSON-header (u32 LE) | JSON | n symbolen (u64 LE) | 2-bit symbolen
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from fractions import Fraction
from pathlib import Path

import numpy as np

from turbo import rng
from turbo.codec import TurboConfig, load_interleaver, random_interleaver, turbo_encode
from turbo.settings import ConfigError, InconsistentTraceError, parse_bool, parse_fraction
from turbo.trellis import ERASED, GeneratorSpec

# ── Configuratie ──────────────────────────────────────────────────────────────

R0 = Fraction(1, 3)     # rate van de ongekoppelde (1, 5/7) turbo-code

VAR_INFO   = 0
VAR_PARITY = 1
VAR_TAIL   = 2

WIRE_MAGIC   = b"PCTC"
WIRE_VERSION = 1


class Family(str, Enum):
    PIC = "PIC"
    PPC = "PPC"


@dataclass(frozen=True)
class CouplingConfig:
    family: Family
    lam: Fraction
    m: int = 1
    L: int | None = None           # None → asymptotische analyse
    K: int | None = None           # None → alleen DE / rates
    rho: Fraction = Fraction(1)
    lam_upper: Fraction | None = None
    lam_lower: Fraction | None = None
    puncture_coupled: bool = True
    random_positions: bool = True      # per transmissie getrokken; False → segmenten aaneengesloten
    inner_iterations: int | None = None
    interleaver_file: str | None = None
    generator: GeneratorSpec = field(default_factory=GeneratorSpec)

    def __post_init__(self):
        try:
            family = Family(str(getattr(self.family, "value", self.family)).upper())
        except ValueError as e:
            raise ConfigError(f"onbekende familie: {self.family!r}") from e
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "lam", parse_fraction(self.lam))
        object.__setattr__(self, "rho", parse_fraction(self.rho))
        if family is Family.PPC:
            lu = self.lam / 2 if self.lam_upper is None else parse_fraction(self.lam_upper)
            ll = self.lam - lu if self.lam_lower is None else parse_fraction(self.lam_lower)
            object.__setattr__(self, "lam_upper", lu)
            object.__setattr__(self, "lam_lower", ll)
        self.validate()

    def validate(self):
        lam, m = self.lam, self.m
        if m < 1:
            raise ConfigError(f"koppelgeheugen m moet ≥ 1 zijn, kreeg {m}")
        if self.family is Family.PIC and not 0 <= lam <= Fraction(1, 2):
            raise ConfigError(f"PIC: λ={lam} buiten [0, 1/2]")
        if self.family is Family.PPC:
            if not 0 <= lam <= 1:
                raise ConfigError(f"PPC: λ={lam} buiten [0, 1]")
            if self.lam_upper < 0 or self.lam_lower < 0 or self.lam_upper + self.lam_lower != lam:
                raise ConfigError(f"PPC: λ^U={self.lam_upper} + λ^L={self.lam_lower} ≠ λ={lam}")
        if not 0 < self.rho <= 1:
            raise ConfigError(f"ρ={self.rho} buiten (0, 1]")
        if self.L is not None and self.L < 2 * m:
            raise ConfigError(f"ketenlengte L={self.L} < 2m={2 * m}")
        if self.K is not None:
            K = self.K
            if K <= 0:
                raise ConfigError(f"K moet positief zijn, kreeg {K}")
            parts = [lam] if self.family is Family.PIC else [lam, self.lam_upper, self.lam_lower]
            for part in parts:
                if (part * K / m).denominator != 1:
                    raise ConfigError(f"segmentlengte {part}·K/m = {part * K / m} is niet geheel")

    # Segmentlengtes (alleen zinvol met K)
    @property
    def segment(self) -> int:
        return int(self.lam * self.K / self.m)

    @property
    def segment_upper(self) -> int:
        return int(self.lam_upper * self.K / self.m)

    @property
    def segment_lower(self) -> int:
        return int(self.lam_lower * self.K / self.m)

    def to_dict(self) -> dict[str, str]:
        d = {k: v for k, v in asdict(self).items() if k != "generator" and v is not None}
        d["family"] = self.family.value
        d["generator"] = f"{self.generator.feedback:o},{self.generator.feedforward:o},{self.generator.memory}"
        return {k: str(v) for k, v in d.items()}

    @classmethod
    def from_dict(cls, d: dict[str, str]) -> "CouplingConfig":
        d = dict(d)
        fb, ff, nu = d.pop("generator", "7,5,2").split(",")
        kwargs: dict = {"generator": GeneratorSpec(int(fb, 8), int(ff, 8), int(nu))}
        for key, value in d.items():
            if key in {"lam", "rho", "lam_upper", "lam_lower"}:
                kwargs[key] = parse_fraction(value)
            elif key in {"m", "L", "K", "inner_iterations"}:
                kwargs[key] = int(value)
            elif key in {"puncture_coupled", "random_positions"}:
                kwargs[key] = parse_bool(value)
            else:
                kwargs[key] = value
        return cls(**kwargs)


# ── Rates ─────────────────────────────────────────────────────────────────────

def termination_loss(cfg: CouplingConfig) -> Fraction:
    """Aantal niet-verzonden infobits aan het ketenende, in eenheden van K."""
    lam, m = cfg.lam, cfg.m
    if cfg.family is Family.PIC:
        return lam * (m + 1) / 2
    return sum((min(j * lam / m, 1 - lam) for j in range(1, m + 1)), Fraction(0))


def rate_of(cfg: CouplingConfig, asymptotic: bool | None = None) -> Fraction:
    """Exacte rate (staarten niet meegeteld); L=None of asymptotic → L → ∞."""
    parity = (1 / R0 - 1) * cfg.rho
    if asymptotic or cfg.L is None:
        return (1 - cfg.lam) / (1 - cfg.lam + parity)
    L = cfg.L
    info = L * (1 - cfg.lam) - termination_loss(cfg)
    return info / (info + L * parity)


def rho_for_rate(rate: Fraction, lam: Fraction, r0: Fraction = R0) -> Fraction:
    """Benodigde pariteitsfractie ρ voor een doelrate (L → ∞)."""
    rate, lam = parse_fraction(rate), parse_fraction(lam)
    return ((1 / rate - 1) / (1 / r0 - 1)) * (1 - lam)


def shortened_rate(s: Fraction, rho: Fraction = Fraction(1)) -> Fraction:
    """Rate van een turbo-code waarvan een fractie s van de infobits op nul staat."""
    s, rho = parse_fraction(s), parse_fraction(rho)
    return (1 - s) / ((1 - s) + (1 / R0 - 1) * rho)


# ── Layout ────────────────────────────────────────────────────────────────────

@dataclass
class ChainLayout:
    cfg: CouplingConfig
    var_kind: np.ndarray        # [n_vars] int8
    var_block: np.ndarray       # [n_vars] blok waarin de variabele verzonden wordt
    sys_var: np.ndarray         # [L, K] variabele per ingangspositie, −1 = vaste nul
    pu_var: np.ndarray          # [L, K]
    pl_var: np.ndarray          # [L, K]
    tail_var: np.ndarray        # [L, 2, ν, 2] (encoder, stap, sys/par)
    interleavers: np.ndarray    # [L, K]
    info_vars: np.ndarray       # volgorde van de infostroom
    coupled_in: list[dict[int, np.ndarray]]     # blok t, offset j → ingangsposities
    coupled_out: list[dict[int, np.ndarray]]    # PIC: ingangsposities; PPC: posities in [pu, pl]
    term_lengths: np.ndarray    # [L]
    partner: np.ndarray = field(init=False)     # [L·3K] andere optreden van dezelfde variabele

    def __post_init__(self):
        L, K = self.sys_var.shape
        occ = np.stack([self.sys_var, self.pu_var, self.pl_var], axis=1).reshape(-1)
        order = np.argsort(occ, kind="stable")
        srt = occ[order]
        dup = (srt[:-1] == srt[1:]) & (srt[:-1] >= 0)
        if np.any(dup[:-1] & dup[1:]):
            raise InconsistentTraceError("een variabele komt in meer dan twee blokposities voor")
        partner = np.full(L * 3 * K, -1, dtype=np.int64)
        first = order[:-1][dup]
        second = order[1:][dup]
        partner[first] = second
        partner[second] = first
        self.partner = partner

    @property
    def L(self) -> int:
        return self.sys_var.shape[0]

    @property
    def K(self) -> int:
        return self.sys_var.shape[1]

    @property
    def n_vars(self) -> int:
        return self.var_kind.shape[0]

    def occurrences(self, t: int) -> np.ndarray:
        """Variabelen van blok t in volgorde [sys, pu, pl] (lengte 3K)."""
        return np.concatenate([self.sys_var[t], self.pu_var[t], self.pl_var[t]])


class _Vars:
    """Uitgifte van globale variabele-indices."""

    def __init__(self):
        self.kind: list[np.ndarray] = []
        self.block: list[np.ndarray] = []
        self.count = 0

    def new(self, n: int, kind: int, block: int) -> np.ndarray:
        ids = np.arange(self.count, self.count + n, dtype=np.int64)
        self.count += n
        self.kind.append(np.full(n, kind, dtype=np.int8))
        self.block.append(np.full(n, block, dtype=np.int32))
        return ids

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.kind:
            return np.zeros(0, np.int8), np.zeros(0, np.int32)
        return np.concatenate(self.kind), np.concatenate(self.block)


def _zeros(n: int) -> np.ndarray:
    return np.full(n, -1, dtype=np.int64)


def _place(order: np.ndarray, cfg: CouplingConfig, seed: int, chain: int, t: int) -> tuple[np.ndarray, np.ndarray]:
    """Zet de segmentvolgorde op componentposities; geeft (sys_var, positie per segmentindex)."""
    K = order.shape[0]
    if cfg.random_positions:
        pos = rng.stream(seed, chain, t, rng.POSITIONS).permutation(K)
    else:
        pos = np.arange(K)
    sys_var = np.empty(K, dtype=np.int64)
    sys_var[pos] = order
    return sys_var, pos


def _interleavers(cfg: CouplingConfig, seed: int, chain: int, fixed: np.ndarray | None) -> np.ndarray:
    K, L = cfg.K, cfg.L
    if fixed is None and cfg.interleaver_file:
        fixed = load_interleaver(cfg.interleaver_file, K)
    if fixed is not None:
        return np.tile(np.asarray(fixed, dtype=np.int64), (L, 1))
    return np.stack([random_interleaver(K, rng.stream(seed, chain, t, rng.INTERLEAVER)) for t in range(L)])


def _check_chain(cfg: CouplingConfig):
    if cfg.K is None or cfg.L is None:
        raise ConfigError("coderen vereist K en L")


def build_layout(cfg: CouplingConfig, seed: int = 0, chain: int = 0,
                 interleaver: np.ndarray | None = None) -> ChainLayout:
    _check_chain(cfg)
    if cfg.family is Family.PIC:
        return _pic_layout(cfg, seed, chain, interleaver)
    return _ppc_layout(cfg, seed, chain, interleaver)


def _tails(vars_: _Vars, nu: int, t: int) -> np.ndarray:
    return vars_.new(2 * nu * 2, VAR_TAIL, t).reshape(2, nu, 2)


def _pic_layout(cfg: CouplingConfig, seed: int, chain: int, interleaver) -> ChainLayout:
    K, L, m, D = cfg.K, cfg.L, cfg.m, cfg.segment
    nu = cfg.generator.memory
    n_unc = K - 2 * m * D
    vars_ = _Vars()

    unc, out = [], []
    for t in range(L):
        unc.append(vars_.new(n_unc, VAR_INFO, t))
        out.append({j: vars_.new(D, VAR_INFO, t) if t + j < L else _zeros(D) for j in range(1, m + 1)})
    info_vars = np.arange(vars_.count, dtype=np.int64)

    sys_var, pu_var, pl_var, tail_var = [], [], [], []
    coupled_in, coupled_out = [], []
    for t in range(L):
        segs = [out[t - j][j] if t - j >= 0 else _zeros(D) for j in range(m, 0, -1)]
        segs += [unc[t]] + [out[t][j] for j in range(1, m + 1)]
        sv, pos = _place(np.concatenate(segs), cfg, seed, chain, t)
        # segmentindex → componentposities
        cin = {j: pos[(m - j) * D:(m - j + 1) * D] for j in range(1, m + 1)}
        base = m * D + n_unc
        cout = {j: pos[base + (j - 1) * D:base + j * D] for j in range(1, m + 1)}
        coupled_in.append(cin)
        coupled_out.append(cout)
        sys_var.append(sv)
        pu_var.append(vars_.new(K, VAR_PARITY, t))
        pl_var.append(vars_.new(K, VAR_PARITY, t))
        tail_var.append(_tails(vars_, nu, t))

    kind, block = vars_.arrays()
    return ChainLayout(cfg, kind, block, np.stack(sys_var), np.stack(pu_var), np.stack(pl_var),
                       np.stack(tail_var), _interleavers(cfg, seed, chain, interleaver), info_vars,
                       coupled_in, coupled_out, np.zeros(L, dtype=np.int64))


def ppc_termination(cfg: CouplingConfig, t: int) -> int:
    """Lengte van de terminatievector van blok t (0-geïndexeerd)."""
    K, L, m = cfg.K, cfg.L, cfg.m
    t1 = t + 1
    if t1 <= L - m:
        return 0
    return int(min((t1 - L + m) * cfg.lam * K / m, K - cfg.lam * K))


def _ppc_layout(cfg: CouplingConfig, seed: int, chain: int, interleaver) -> ChainLayout:
    K, L, m = cfg.K, cfg.L, cfg.m
    DU, DL = cfg.segment_upper, cfg.segment_lower
    nu = cfg.generator.memory
    vars_ = _Vars()

    # gekoppelde pariteit komt van de staart van elke stroom, geordend naar j
    out_u = {j: np.arange(K - m * DU + (j - 1) * DU, K - m * DU + j * DU) for j in range(1, m + 1)}
    out_l = {j: np.arange(K - m * DL + (j - 1) * DL, K - m * DL + j * DL) for j in range(1, m + 1)}

    sys_var, pu_var, pl_var, tail_var = [], [], [], []
    coupled_in, coupled_out, info_parts, terms = [], [], [], []
    for t in range(L):
        term = ppc_termination(cfg, t)
        fresh = vars_.new(K - m * (DU + DL) - term, VAR_INFO, t)
        info_parts.append(fresh)
        terms.append(term)
        segs = []
        for j in range(m, 0, -1):
            if t - j >= 0:
                segs += [pu_var[t - j][out_u[j]], pl_var[t - j][out_l[j]]]
            else:
                segs.append(_zeros(DU + DL))
        segs += [fresh, _zeros(term)]
        sv, pos = _place(np.concatenate(segs), cfg, seed, chain, t)
        seg = DU + DL
        coupled_in.append({j: pos[(m - j) * seg:(m - j + 1) * seg] for j in range(1, m + 1)})
        coupled_out.append({j: np.concatenate([out_u[j], K + out_l[j]]) for j in range(1, m + 1) if t + j < L})
        sys_var.append(sv)
        pu_var.append(vars_.new(K, VAR_PARITY, t))
        pl_var.append(vars_.new(K, VAR_PARITY, t))
        tail_var.append(_tails(vars_, nu, t))

    kind, block = vars_.arrays()
    return ChainLayout(cfg, kind, block, np.stack(sys_var), np.stack(pu_var), np.stack(pl_var),
                       np.stack(tail_var), _interleavers(cfg, seed, chain, interleaver),
                       np.concatenate(info_parts), coupled_in, coupled_out, np.asarray(terms, dtype=np.int64))


# ── Codewoord ─────────────────────────────────────────────────────────────────

@dataclass
class ChainCodeword:
    layout: ChainLayout
    bits: np.ndarray            # [n_vars] int8
    punctured: np.ndarray       # [n_vars] bool

    @property
    def info(self) -> np.ndarray:
        return self.bits[self.layout.info_vars]

    @property
    def transmitted(self) -> np.ndarray:
        """Masker van verzonden variabelen (staarten inbegrepen)."""
        return ~self.punctured

    @property
    def n_info(self) -> int:
        return int(self.layout.info_vars.shape[0])

    @property
    def n_transmitted(self) -> int:
        """Verzonden bits zonder staarten; teller van de rate-noemer."""
        return int((~self.punctured & (self.layout.var_kind != VAR_TAIL)).sum())

    def block_vars(self, t: int) -> np.ndarray:
        """Variabelen die in blok t verzonden worden (c_t)."""
        return np.flatnonzero((self.layout.var_block == t) & ~self.punctured)

    def blocks(self) -> list[np.ndarray]:
        return [self.bits[self.block_vars(t)] for t in range(self.layout.L)]

    def measured_rate(self) -> Fraction:
        return Fraction(self.n_info, self.n_transmitted)


def draw_puncturing(layout: ChainLayout, seed: int = 0, chain: int = 0) -> np.ndarray:
    """Per blok round(ρ·2K) overlevende pariteitsbits, uniform gekozen."""
    cfg = layout.cfg
    punctured = np.zeros(layout.n_vars, dtype=bool)
    if cfg.rho == 1:
        return punctured
    K = layout.K
    keep = round(cfg.rho * 2 * K)
    for t in range(layout.L):
        cand = np.concatenate([layout.pu_var[t], layout.pl_var[t]])
        if cfg.family is Family.PPC and not cfg.puncture_coupled and layout.coupled_out[t]:
            coupled = np.concatenate(list(layout.coupled_out[t].values()))
            cand = np.delete(cand, coupled)
        n_punct = 2 * K - keep
        if n_punct > cand.shape[0]:
            raise ConfigError(f"blok {t}: {n_punct} bits te punctureren maar slechts {cand.shape[0]} kandidaten")
        chosen = rng.stream(seed, chain, t, rng.PUNCTURE).choice(cand, size=n_punct, replace=False)
        punctured[chosen] = True
    return punctured


def encode_layout(layout: ChainLayout, info: np.ndarray, punctured: np.ndarray | None = None) -> ChainCodeword:
    """Codeer blok voor blok; PPC leest gekoppelde pariteit van eerdere blokken."""
    info = np.asarray(info, dtype=np.int8)
    if info.shape != layout.info_vars.shape:
        raise ConfigError(f"infostroom heeft lengte {info.shape[0]}, verwacht {layout.info_vars.shape[0]}")
    cfg = layout.cfg
    bits = np.zeros(layout.n_vars, dtype=np.int8)
    bits[layout.info_vars] = info
    for t in range(layout.L):
        sv = layout.sys_var[t]
        u = np.where(sv >= 0, bits[np.maximum(sv, 0)], 0).astype(np.int8)
        cw = turbo_encode(TurboConfig(layout.K, layout.interleavers[t], cfg.generator), u)
        bits[layout.pu_var[t]] = cw.parity_upper
        bits[layout.pl_var[t]] = cw.parity_lower
        bits[layout.tail_var[t, 0]] = cw.tail_upper
        bits[layout.tail_var[t, 1]] = cw.tail_lower
    if punctured is None:
        punctured = np.zeros(layout.n_vars, dtype=bool)
    return ChainCodeword(layout, bits, punctured)


def info_length(cfg: CouplingConfig) -> int:
    _check_chain(cfg)
    return int(cfg.K * (cfg.L * (1 - cfg.lam) - termination_loss(cfg)))


def _encode(cfg: CouplingConfig, family: Family, info: np.ndarray, seed: int, chain: int,
            interleaver: np.ndarray | None) -> ChainCodeword:
    if cfg.family is not family:
        raise ConfigError(f"{family.value}-encoder aangeroepen met familie {cfg.family.value}")
    layout = build_layout(cfg, seed, chain, interleaver)
    return encode_layout(layout, info, draw_puncturing(layout, seed, chain))


def pic_encode(cfg: CouplingConfig, info: np.ndarray, seed: int = 0, chain: int = 0,
               interleaver: np.ndarray | None = None) -> ChainCodeword:
    return _encode(cfg, Family.PIC, info, seed, chain, interleaver)


def ppc_encode(cfg: CouplingConfig, info: np.ndarray, seed: int = 0, chain: int = 0,
               interleaver: np.ndarray | None = None) -> ChainCodeword:
    return _encode(cfg, Family.PPC, info, seed, chain, interleaver)


def chain_encode(cfg: CouplingConfig, info: np.ndarray, seed: int = 0, chain: int = 0,
                 interleaver: np.ndarray | None = None) -> ChainCodeword:
    return _encode(cfg, cfg.family, info, seed, chain, interleaver)


def uncoupled(cfg: CouplingConfig) -> CouplingConfig:
    return replace(cfg, lam=Fraction(0), lam_upper=None, lam_lower=None)


# ── Wire-formaat ──────────────────────────────────────────────────────────────

def pack_symbols(symbols: np.ndarray) -> bytes:
    sym = np.asarray(symbols, dtype=np.uint8)
    if sym.size and sym.max() > ERASED:
        raise ConfigError("symbolen moeten 0, 1 of 2 zijn")
    pad = (-sym.shape[0]) % 4
    quads = np.concatenate([sym, np.zeros(pad, np.uint8)]).reshape(-1, 4)
    packed = quads[:, 0] | (quads[:, 1] << 2) | (quads[:, 2] << 4) | (quads[:, 3] << 6)
    return packed.astype(np.uint8).tobytes()


def unpack_symbols(data: bytes, n: int) -> np.ndarray:
    packed = np.frombuffer(data, dtype=np.uint8)
    quads = np.stack([(packed >> s) & 3 for s in (0, 2, 4, 6)], axis=1).reshape(-1)
    if quads.shape[0] < n:
        raise ConfigError(f"spoor afgekapt: {quads.shape[0]} < {n} symbolen")
    return quads[:n].astype(np.int8)


def write_trace(path: str | Path, cfg: CouplingConfig, received: np.ndarray, seed: int, chain: int,
                extra: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {"config": cfg.to_dict(), "seed": seed, "chain": chain, **(extra or {})}
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    received = np.asarray(received, dtype=np.int8)
    with path.open("wb") as fh:
        fh.write(WIRE_MAGIC + struct.pack("<BI", WIRE_VERSION, len(blob)))
        fh.write(blob)
        fh.write(struct.pack("<Q", received.shape[0]))
        fh.write(pack_symbols(received))
    return path


def read_trace(path: str | Path) -> tuple[CouplingConfig, np.ndarray, dict]:
    """Geeft (config, ontvangen symbolen per variabele, volledige header)."""
    data = Path(path).read_bytes()
    if data[:4] != WIRE_MAGIC:
        raise ConfigError(f"{path}: geen .pct-bestand")
    version, n_header = struct.unpack_from("<BI", data, 4)
    if version != WIRE_VERSION:
        raise ConfigError(f"{path}: versie {version} niet ondersteund")
    start = 4 + struct.calcsize("<BI")
    header = json.loads(data[start:start + n_header].decode("utf-8"))
    pos = start + n_header
    (n,) = struct.unpack_from("<Q", data, pos)
    symbols = unpack_symbols(data[pos + 8:], n)
    return CouplingConfig.from_dict(header["config"]), symbols, header
