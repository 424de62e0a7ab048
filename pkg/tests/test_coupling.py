from fractions import Fraction

import numpy as np
import pytest

from turbo import rng
from turbo.codec import TurboConfig, turbo_encode
from turbo.coupling import (
    VAR_INFO,
    CouplingConfig,
    Family,
    build_layout,
    chain_encode,
    info_length,
    pack_symbols,
    ppc_encode,
    rate_of,
    read_trace,
    rho_for_rate,
    shortened_rate,
    unpack_symbols,
    write_trace,
)
from turbo.settings import ConfigError


def _info(cfg, seed=0):
    return rng.stream(seed, 0, 0, rng.INFO).integers(0, 2, info_length(cfg), dtype=np.int8)


@pytest.mark.parametrize("family,lam,rho,expected", [
    ("PIC", "1/2", 1, Fraction(1, 5)),
    ("PIC", "1/3", 1, Fraction(1, 4)),
    ("PIC", "1/2", "1/4", Fraction(1, 2)),
    ("PPC", "7/9", 1, Fraction(1, 10)),
    ("PIC", 0, 1, Fraction(1, 3)),
])
def test_asymptotic_rates(family, lam, rho, expected):
    assert rate_of(CouplingConfig(family, lam, rho=rho)) == expected


def test_rho_for_rate_inverts_rate():
    for lam in (Fraction(0), Fraction(1, 10), Fraction(23, 50), Fraction(1, 2)):
        rho = rho_for_rate(Fraction(1, 2), lam)
        assert rate_of(CouplingConfig("PIC", lam, rho=rho)) == Fraction(1, 2)
    assert shortened_rate(0) == Fraction(1, 3)


def test_config_validation():
    with pytest.raises(ConfigError):
        CouplingConfig("PIC", "0.6")
    with pytest.raises(ConfigError):
        CouplingConfig("PPC", "1/2", lam_upper="1/2", lam_lower="1/4")
    with pytest.raises(ConfigError):
        CouplingConfig("PIC", "1/4", m=2, L=3, K=16)
    with pytest.raises(ConfigError):
        CouplingConfig("PIC", "1/4", K=10, L=4)
    with pytest.raises(ConfigError):
        CouplingConfig("XYZ", "1/4")
    with pytest.raises(ConfigError):
        CouplingConfig("PIC", "1/4", rho=0)


def test_ppc_default_split():
    cfg = CouplingConfig("ppc", "1/4")
    assert cfg.family is Family.PPC
    assert cfg.lam_upper == cfg.lam_lower == Fraction(1, 8)


def test_ppc_example_counts():
    cfg = CouplingConfig("PPC", "1/4", m=1, L=10, K=1000)
    assert info_length(cfg) == 7250
    cw = ppc_encode(cfg, _info(cfg))
    assert cw.n_info == 7250
    assert cw.n_transmitted == 27250
    assert cw.measured_rate() == rate_of(cfg)


@pytest.mark.parametrize("m", [1, 2])
def test_pic_info_bits_coupled_at_most_once(m):
    cfg = CouplingConfig("PIC", "1/4", m=m, L=6, K=32)
    lay = build_layout(cfg)
    counts = np.bincount(lay.sys_var[lay.sys_var >= 0], minlength=lay.n_vars)
    info_counts = counts[lay.info_vars]
    assert set(np.unique(info_counts)) <= {1, 2}
    # elk gekoppeld segment van blok t komt terug in blok t+j
    D = cfg.segment
    for t in range(cfg.L - m):
        for j in range(1, m + 1):
            out_vars = lay.sys_var[t][lay.coupled_out[t][j]]
            in_vars = lay.sys_var[t + j][lay.coupled_in[t + j][j]]
            assert out_vars.shape == (D,)
            assert np.array_equal(out_vars, in_vars)
    assert np.all(lay.var_kind[lay.info_vars] == VAR_INFO)


def test_pic_first_blocks_zero_padded_and_rate():
    cfg = CouplingConfig("PIC", "1/2", m=1, L=10, K=1000)
    cw = chain_encode(cfg, _info(cfg))
    assert cw.n_info == 4500
    assert np.all(cw.layout.sys_var[0][cw.layout.coupled_in[0][1]] == -1)
    assert cw.measured_rate() == rate_of(cfg)


@pytest.mark.parametrize("family", ["PIC", "PPC"])
def test_blocks_are_turbo_codewords(family):
    cfg = CouplingConfig(family, "1/4", m=2, L=5, K=32)
    cw = chain_encode(cfg, _info(cfg), seed=4)
    lay = cw.layout
    for t in range(cfg.L):
        sv = lay.sys_var[t]
        u = np.where(sv >= 0, cw.bits[np.maximum(sv, 0)], 0)
        ref = turbo_encode(TurboConfig(cfg.K, lay.interleavers[t]), u)
        assert np.array_equal(cw.bits[lay.pu_var[t]], ref.parity_upper)
        assert np.array_equal(cw.bits[lay.pl_var[t]], ref.parity_lower)


def test_ppc_coupled_parity_feeds_later_blocks():
    cfg = CouplingConfig("PPC", "1/2", m=1, L=4, K=16)
    lay = build_layout(cfg)
    for t in range(cfg.L - 1):
        produced = np.concatenate([lay.pu_var[t], lay.pl_var[t]])[lay.coupled_out[t][1]]
        consumed = lay.sys_var[t + 1][lay.coupled_in[t + 1][1]]
        assert np.array_equal(produced, consumed)
    assert lay.term_lengths.tolist() == [0, 0, 0, 8]


def test_puncturing_counts():
    cfg = CouplingConfig("PIC", "1/4", m=1, L=4, K=16, rho="1/2")
    cw = chain_encode(cfg, _info(cfg))
    for t in range(cfg.L):
        par = np.concatenate([cw.layout.pu_var[t], cw.layout.pl_var[t]])
        assert cw.punctured[par].sum() == 16
    assert not cw.punctured[cw.layout.info_vars].any()


def test_ppc_coupled_parity_kept_when_requested():
    cfg = CouplingConfig("PPC", "1/2", m=1, L=4, K=16, rho="1/2", puncture_coupled=False)
    cw = chain_encode(cfg, _info(cfg))
    lay = cw.layout
    for t in range(cfg.L - 1):
        coupled = np.concatenate([lay.pu_var[t], lay.pl_var[t]])[lay.coupled_out[t][1]]
        assert not cw.punctured[coupled].any()


def test_random_positions_are_seeded():
    cfg = CouplingConfig("PIC", "1/4", m=1, L=4, K=16, random_positions=True)
    a, b = build_layout(cfg, seed=1), build_layout(cfg, seed=1)
    c = build_layout(cfg, seed=2)
    assert np.array_equal(a.sys_var, b.sys_var)
    assert not np.array_equal(a.sys_var, c.sys_var)


def test_pack_symbols_handles_padding():
    sym = np.array([0, 1, 2, 2, 1], dtype=np.int8)
    data = pack_symbols(sym)
    assert len(data) == 2
    assert unpack_symbols(data, 5).tolist() == sym.tolist()
    with pytest.raises(ConfigError):
        pack_symbols(np.array([3]))
    with pytest.raises(ConfigError):
        unpack_symbols(data, 9)


def test_trace_file(tmp_path):
    cfg = CouplingConfig("PPC", "1/4", m=1, L=4, K=16, rho="3/4")
    rx = np.random.default_rng(2).integers(0, 3, 200).astype(np.int8)
    path = write_trace(tmp_path / "spoor.pct", cfg, rx, seed=7, chain=3, extra={"eps": 0.4})
    cfg2, rx2, header = read_trace(path)
    assert cfg2 == cfg
    assert np.array_equal(rx2, rx)
    assert header["seed"] == 7 and header["chain"] == 3 and header["eps"] == 0.4

    bad = tmp_path / "kapot.pct"
    bad.write_bytes(b"XXXX" + path.read_bytes()[4:])
    with pytest.raises(ConfigError):
        read_trace(bad)


def test_finite_chain_rate_example():
    cfg = CouplingConfig("PIC", "1/8", m=1, L=100, K=64)
    expected = Fraction(100 * 7, 8) - Fraction(1, 8)
    expected /= 100 * (3 - Fraction(1, 8)) - Fraction(1, 8)
    assert rate_of(cfg) == expected
    cw = chain_encode(cfg, _info(cfg))
    assert cw.measured_rate() == expected


@pytest.mark.parametrize("family,m,rho", [
    ("PIC", 1, 1), ("PIC", 3, "3/4"), ("PPC", 2, 1), ("PPC", 3, "1/2"),
])
def test_blocks_cover_every_variable_once(family, m, rho):
    cfg = CouplingConfig(family, "1/4", m=m, L=6, K=48, rho=rho)
    cw = chain_encode(cfg, _info(cfg), seed=3)
    lay = cw.layout
    sent = np.concatenate([np.flatnonzero(lay.var_block == t) for t in range(cfg.L)])
    assert np.array_equal(np.sort(sent), np.arange(lay.n_vars))
    # elke variabele staat op minstens één componentpositie; gekoppelde op precies twee
    refs = np.concatenate([lay.sys_var.ravel(), lay.pu_var.ravel(), lay.pl_var.ravel(), lay.tail_var.ravel()])
    counts = np.bincount(refs[refs >= 0], minlength=lay.n_vars)
    assert counts.min() >= 1 and counts.max() <= 2
    coupled = np.flatnonzero(lay.partner >= 0)
    assert (counts == 2).sum() * 2 == coupled.shape[0]
    # verzonden bits zonder staarten zijn precies de rate-noemer
    assert Fraction(cw.n_info, cw.n_transmitted) == rate_of(cfg)


def test_contiguous_placement_when_disabled():
    cfg = CouplingConfig("PIC", "1/2", m=1, L=4, K=16, random_positions=False)
    lay = build_layout(cfg)
    assert lay.coupled_in[1][1].tolist() == list(range(8))
    assert lay.coupled_out[1][1].tolist() == list(range(8, 16))
    default = build_layout(CouplingConfig("PIC", "1/2", m=1, L=4, K=16))
    assert default.cfg.random_positions
    assert sorted(default.coupled_in[1][1].tolist() + default.coupled_out[1][1].tolist()) == list(range(16))
