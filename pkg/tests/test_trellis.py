import itertools

import numpy as np
import pytest

from turbo.settings import ConfigError, InconsistentTraceError
from turbo.trellis import (
    ERASED,
    GeneratorSpec,
    bcjr_erasure_decode,
    build_trellis,
    combine,
    erased,
    rsc_encode,
)


def reference_parity(info):
    """(1, 5/7) via de recursie w_t = u_t ⊕ w_{t−1} ⊕ w_{t−2}, v_t = w_t ⊕ w_{t−2}."""
    w1 = w2 = 0
    out = []
    for u in info:
        w = u ^ w1 ^ w2
        out.append(w ^ w2)
        w1, w2 = w, w1
    return np.array(out, dtype=np.int8)


def test_trellis_tables_1_5_7():
    tr = build_trellis()
    assert tr.num_states == 4
    assert tr.next_state.tolist() == [[0, 1], [3, 2], [1, 0], [2, 3]]
    assert tr.parity_out.tolist() == [[0, 1], [1, 0], [0, 1], [1, 0]]


def test_generator_validation():
    with pytest.raises(ConfigError):
        build_trellis(GeneratorSpec(feedback=0o3, feedforward=0o5, memory=2))
    with pytest.raises(ConfigError):
        build_trellis(GeneratorSpec(memory=7))


def test_impulse_response():
    parity, tail = rsc_encode(build_trellis(), np.array([1, 0, 0, 0, 0, 0, 0]), terminate=False)
    assert parity.tolist() == [1, 1, 1, 0, 1, 1, 0]
    assert tail.shape == (0, 2)


def test_encode_matches_recursion_and_terminates():
    gen = np.random.default_rng(3)
    tr = build_trellis()
    for _ in range(20):
        info = gen.integers(0, 2, 50)
        parity, tail = rsc_encode(tr, info)
        assert np.array_equal(parity, reference_parity(info))
        # staart + pariteit vormen samen een pad dat in toestand 0 eindigt
        full = np.concatenate([info, tail[:, 0]])
        assert np.array_equal(reference_parity(full)[-2:], tail[:, 1])


def test_encode_rejects_non_binary():
    with pytest.raises(ConfigError):
        rsc_encode(build_trellis(), np.array([0, 2, 1]))


def _paths(tr, n, start_known, end_known):
    """Alle (sys, par)-paden van lengte n vanaf toestand 0 (of elke toestand)."""
    inputs = np.array(list(itertools.product((0, 1), repeat=n)), dtype=np.int8).reshape(-1, n)
    sys_w, par_w = [], []
    for s0 in ([0] if start_known else range(tr.num_states)):
        state = np.full(inputs.shape[0], s0, dtype=np.int64)
        par = np.empty_like(inputs)
        for t in range(n):
            par[:, t] = tr.parity_out[state, inputs[:, t]]
            state = tr.next_state[state, inputs[:, t]]
        keep = state == 0 if end_known else np.ones(inputs.shape[0], dtype=bool)
        sys_w.append(inputs[keep])
        par_w.append(par[keep])
    return np.concatenate(sys_w), np.concatenate(par_w)


def _values(ok, words):
    has0 = (ok & (words == 0)).any(axis=0)
    has1 = (ok & (words == 1)).any(axis=0)
    return np.where(has0 & has1, ERASED, np.where(has1, 1, 0)).astype(np.int8)


def _oracle(sys_w, par_w, sys_prior, par_prior):
    """Waarden per positie over alle paden die de andere priors respecteren."""
    miss_s = (sys_prior != ERASED) & (sys_w != sys_prior)
    miss_p = (par_prior != ERASED) & (par_w != par_prior)
    n_s, n_p = miss_s.sum(axis=1), miss_p.sum(axis=1)
    ok_s = (n_p == 0)[:, None] & ((n_s[:, None] - miss_s) == 0)
    ok_p = (n_s == 0)[:, None] & ((n_p[:, None] - miss_p) == 0)
    return _values(ok_s, sys_w), _values(ok_p, par_w)


def _random_trace(gen, sys_w, par_w, eps):
    i = gen.integers(sys_w.shape[0])
    sys_true, par_true = sys_w[i], par_w[i]
    sys_rx = np.where(gen.random(sys_true.shape[0]) < eps, ERASED, sys_true).astype(np.int8)
    par_rx = np.where(gen.random(par_true.shape[0]) < eps, ERASED, par_true).astype(np.int8)
    return sys_true, par_true, sys_rx, par_rx


@pytest.mark.parametrize("start_known", [True, False])
def test_bcjr_matches_brute_force(start_known):
    tr = build_trellis()
    gen = np.random.default_rng(11)
    books = {}
    for _ in range(1000):
        n = int(gen.integers(1, 13))
        end_known = bool(gen.integers(2))
        if (n, end_known) not in books:
            books[n, end_known] = _paths(tr, n, start_known, end_known)
        sys_w, par_w = books[n, end_known]
        _, _, sys_rx, par_rx = _random_trace(gen, sys_w, par_w, gen.uniform(0.1, 0.9))
        sys_ext, par_ext = bcjr_erasure_decode(tr, sys_rx, par_rx, start_known=start_known, end_known=end_known)
        exp_sys, exp_par = _oracle(sys_w, par_w, sys_rx, par_rx)
        assert sys_ext.tolist() == exp_sys.tolist()
        assert par_ext.tolist() == exp_par.tolist()


def test_terminated_codewords_are_paths_to_zero():
    tr = build_trellis()
    sys_w, par_w = _paths(tr, 8, start_known=True, end_known=True)
    assert sys_w.shape[0] == 2 ** 6
    for bits in itertools.product((0, 1), repeat=6):
        parity, tail = rsc_encode(tr, np.array(bits))
        word = np.concatenate([bits, tail[:, 0]])
        match = np.flatnonzero((sys_w == word).all(axis=1))
        assert match.shape == (1,)
        assert par_w[match[0]].tolist() == np.concatenate([parity, tail[:, 1]]).tolist()


@pytest.mark.parametrize("start_known", [True, False])
def test_revealing_a_bit_never_erases_known_output(start_known):
    tr = build_trellis()
    gen = np.random.default_rng(5)
    sys_w, par_w = _paths(tr, 12, start_known, end_known=False)
    for _ in range(100):
        sys_true, par_true, sys_rx, par_rx = _random_trace(gen, sys_w, par_w, 0.6)
        base_sys, base_par = bcjr_erasure_decode(tr, sys_rx, par_rx, start_known=start_known)
        for prior, truth in ((sys_rx, sys_true), (par_rx, par_true)):
            holes = np.flatnonzero(prior == ERASED)
            if holes.size == 0:
                continue
            t = holes[gen.integers(holes.size)]
            prior[t] = truth[t]
            new_sys, new_par = bcjr_erasure_decode(tr, sys_rx, par_rx, start_known=start_known)
            for base, new in ((base_sys, new_sys), (base_par, new_par)):
                keep = base != ERASED
                assert np.array_equal(new[keep], base[keep])
            prior[t] = ERASED


def test_bcjr_all_erased_stays_erased():
    sys_ext, par_ext = bcjr_erasure_decode(build_trellis(), erased(30), erased(30))
    assert np.all(sys_ext == ERASED)
    assert np.all(par_ext == ERASED)


def test_bcjr_detects_inconsistent_priors():
    sys_prior = np.zeros(10, dtype=np.int8)
    par_prior = np.zeros(10, dtype=np.int8)
    par_prior[0] = 1
    with pytest.raises(InconsistentTraceError):
        bcjr_erasure_decode(build_trellis(), sys_prior, par_prior)


def test_bcjr_length_mismatch():
    with pytest.raises(ConfigError):
        bcjr_erasure_decode(build_trellis(), erased(4), erased(5))


def test_combine():
    a = np.array([0, ERASED, 1, ERASED], dtype=np.int8)
    b = np.array([ERASED, 1, 1, ERASED], dtype=np.int8)
    assert combine(a, b).tolist() == [0, 1, 1, ERASED]
    with pytest.raises(InconsistentTraceError):
        combine(a, np.array([1, ERASED, ERASED, ERASED], dtype=np.int8))


def test_every_state_has_two_incoming_branches():
    tr = build_trellis()
    assert [len(p) for p in tr.prev_branches] == [2] * tr.num_states
    assert (2, 1) in tr.prev_branches[0]


def test_known_systematic_determines_parity():
    tr = build_trellis()
    info = np.random.default_rng(8).integers(0, 2, 40)
    parity, _ = rsc_encode(tr, info, terminate=False)
    _, par_ext = bcjr_erasure_decode(tr, info, erased(40))
    assert np.array_equal(par_ext, parity)


def test_extrinsic_ignores_own_prior():
    tr = build_trellis()
    gen = np.random.default_rng(21)
    info = gen.integers(0, 2, 30)
    parity, _ = rsc_encode(tr, info, terminate=False)
    sys_rx = np.where(gen.random(30) < 0.5, ERASED, info).astype(np.int8)
    par_rx = np.where(gen.random(30) < 0.5, ERASED, parity).astype(np.int8)
    base_sys, base_par = bcjr_erasure_decode(tr, sys_rx, par_rx)
    for t in range(30):
        s2 = sys_rx.copy()
        s2[t] = ERASED if s2[t] != ERASED else info[t]
        assert bcjr_erasure_decode(tr, s2, par_rx)[0][t] == base_sys[t]
        p2 = par_rx.copy()
        p2[t] = ERASED if p2[t] != ERASED else parity[t]
        assert bcjr_erasure_decode(tr, sys_rx, p2)[1][t] == base_par[t]


def test_largest_memory_with_unknown_end_states():
    spec = GeneratorSpec(feedback=0o45, feedforward=0o53, memory=5)
    tr = build_trellis(spec)
    assert tr.num_states == 32
    sys_ext, par_ext = bcjr_erasure_decode(tr, erased(40), erased(40), start_known=False, end_known=False)
    assert np.all(sys_ext == ERASED) and np.all(par_ext == ERASED)
    info = np.random.default_rng(4).integers(0, 2, 40)
    parity, _ = rsc_encode(tr, info, terminate=False)
    _, par_ext = bcjr_erasure_decode(tr, info, erased(40))
    assert np.array_equal(par_ext, parity)
    with pytest.raises(ConfigError):
        build_trellis(GeneratorSpec(feedback=0o147, feedforward=0o135, memory=6))
