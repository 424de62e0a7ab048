import numpy as np
import pytest

from turbo import rng
from turbo.coupling import CouplingConfig, chain_encode, info_length
from turbo.settings import ConfigError, read_csv
from turbo.simulate import (
    BERWriter,
    ExperimentSpec,
    bec_transmit,
    records_frame,
    run_ber,
    simulate_chain,
    write_plot_script,
)
from turbo.trellis import ERASED

CFG = CouplingConfig("PIC", "1/2", m=1, L=4, K=32)


def test_spec_validation():
    with pytest.raises(ConfigError):
        ExperimentSpec(CFG, [0.5], decoder="window", window=1)
    with pytest.raises(ConfigError):
        ExperimentSpec(CFG, [1.5])
    with pytest.raises(ConfigError):
        ExperimentSpec(CouplingConfig("PIC", "1/2"), [0.5])
    with pytest.raises(ConfigError):
        ExperimentSpec(CFG, [0.5], decoder="viterbi")


def test_bec_transmit_extremes():
    info = np.zeros(info_length(CFG), dtype=np.int8)
    cw = chain_encode(CouplingConfig("PIC", "1/2", m=1, L=4, K=32, rho="1/2"), info)
    gen = rng.stream(0, 0, 0, rng.CHANNEL)
    assert np.all(bec_transmit(cw, 1.0, gen) == ERASED)
    rx = bec_transmit(cw, 0.0, gen)
    assert np.array_equal(rx == ERASED, cw.punctured)


def test_noiseless_sweep_has_no_errors():
    spec = ExperimentSpec(CFG, [0.0], min_errors=1, max_chains=4)
    (rec,) = run_ber(spec, threads=2)
    assert rec.errors == 0
    assert rec.chains == 4
    assert rec.bits == 4 * info_length(CFG)
    assert rec.ber == 0.0


def test_results_do_not_depend_on_threads():
    spec = ExperimentSpec(CFG, [0.6, 0.8], min_errors=10**9, max_chains=12, seed=5)
    a = run_ber(spec, threads=1)
    b = run_ber(spec, threads=4)
    assert [(r.bits, r.errors, r.chains) for r in a] == [(r.bits, r.errors, r.chains) for r in b]


def test_chains_use_independent_streams():
    spec = ExperimentSpec(CFG, [0.8], seed=1)
    assert simulate_chain(spec, 0, 0) == simulate_chain(spec, 0, 0)
    results = {simulate_chain(spec, 0, c)[1] for c in range(6)}
    assert len(results) > 1


def test_stops_after_enough_errors():
    spec = ExperimentSpec(CFG, [0.95], min_errors=5, max_chains=1000)
    (rec,) = run_ber(spec, threads=2)
    assert rec.errors >= 5
    assert rec.chains == 8


def test_window_decoder_sweep():
    spec = ExperimentSpec(CFG, [0.3], decoder="window", window=2, window_iterations=3, max_chains=2)
    (rec,) = run_ber(spec, threads=1)
    assert rec.chains == 2


def test_writer_and_plot_script(tmp_path):
    spec = ExperimentSpec(CFG, [0.5, 0.7], max_chains=2)
    path = tmp_path / "ber.csv"
    writer = BERWriter(path, spec, {"command": "ber", "family": "PIC"})
    records = run_ber(spec, threads=1, writer=writer)
    df = read_csv(path)
    assert df["eps"].tolist() == [0.5, 0.7]
    assert df["chains"].tolist() == [2, 2]
    assert path.read_text().startswith("# command=ber")
    assert records_frame(records)["bits"].tolist() == df["bits"].tolist()

    gp = write_plot_script(path, threshold=0.79, title="PIC")
    text = gp.read_text()
    assert gp.name == "ber.csv.gp"
    assert "set logscale y" in text and "0.79" in text


def _fixed_chains(cfg, eps, chains, **kwargs):
    return ExperimentSpec(cfg, eps, min_errors=10**12, max_chains=chains, seed=11, **kwargs)


@pytest.mark.slow
def test_pic_chain_decodes_below_threshold():
    cfg = CouplingConfig("PIC", "1/2", m=1, L=20, K=50_000)
    below, above = run_ber(_fixed_chains(cfg, [0.78, 0.82], 2))
    assert below.ber < 1e-3
    assert above.ber > 1e-1


@pytest.mark.slow
def test_ppc_chain_decodes_below_threshold():
    # λ^U·K = λ^L·K = K/6 moet geheel zijn
    cfg = CouplingConfig("PPC", "1/3", m=1, L=20, K=48_000)
    below, above = run_ber(_fixed_chains(cfg, [0.725, 0.77], 2))
    assert below.ber < 1e-3
    assert above.ber > 1e-1


@pytest.mark.slow
def test_uncoupled_chain_fails_above_turbo_threshold():
    cfg = CouplingConfig("PIC", 0, m=1, L=2, K=50_000)
    (rec,) = run_ber(_fixed_chains(cfg, [0.70], 1))
    assert rec.ber > 1e-1


def _last_good_eps(records, target=1e-3):
    good = None
    for rec in sorted(records, key=lambda r: r.eps):
        if rec.ber > target:
            break
        good = rec.eps
    return good


@pytest.mark.slow
def test_window_of_four_tracks_ff_fb():
    cfg = CouplingConfig("PIC", "1/8", m=1, L=20, K=6144)
    grid = [round(0.62 + 0.002 * k, 3) for k in range(36)]
    ff = _last_good_eps(run_ber(_fixed_chains(cfg, grid, 2)))
    win = _last_good_eps(run_ber(_fixed_chains(cfg, grid, 2, decoder="window", window=4)))
    assert ff is not None and win is not None
    assert abs(ff - win) < 0.004


def test_default_placement_decodes_just_below_threshold():
    cfg = CouplingConfig("PIC", "1/2", m=1, L=20, K=6000)
    assert cfg.random_positions
    bits, erased = simulate_chain(ExperimentSpec(cfg, [0.77], seed=3), 0, 0)
    assert bits == info_length(cfg)
    assert erased == 0
