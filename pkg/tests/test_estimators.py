"""Factory, stage pipelines, and point-estimate formulas."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqratio.design import LOR, LRR, OR, RR, SecondStageParams, derive_design
from seqratio.estimators import (
    Stage2Counts,
    _CritBits,
    _factory_ibs,
    _factory_parse,
    _factory_parse_py,
    bernoulli_factory_pq,
    estimate,
    point_estimate,
    run_stage1,
    run_stage2,
)
from seqratio.rng import TAG_FACTORY_POP1
from seqratio.sampling import DrawCapExceeded, SampleLedger, SampleSource, SyntheticSource
from seqratio.special import harmonic


class FixedSource(SampleSource):
    def __init__(self, bits1=(), bits2=()):
        self.ledger = SampleLedger()
        self._bits = [list(bits1), list(bits2)]
        self._i = [0, 0]

    def draw(self, pop):
        bit = self._bits[pop][self._i[pop]]
        self._i[pop] += 1
        self.ledger.add(pop, 1)
        return bit


class ScriptedCoin:
    def __init__(self, values):
        self.values = list(values)

    def integers(self, lo, hi):
        return self.values.pop(0)


class LowBitStream:
    """integers(0,2) replayed as the low bit of raw Philox words — the
    exact extraction the buffered criterion reader uses."""

    def __init__(self, gen):
        self.gen = gen

    def integers(self, lo, hi):
        return int(self.gen.bit_generator.random_raw() & np.uint64(1))


# ------------------------------------------------------------ factory unit


@pytest.mark.parametrize(
    "coin,bits,want_out,want_used",
    [
        (0, [0], 0, 1),  # first draw fails the c=0 scheme outright
        (0, [1, 0], 1, 2),
        (0, [1, 1], 0, 2),
        (1, [1], 0, 1),
        (1, [0, 1], 1, 2),
        (1, [0, 0], 0, 2),
    ],
)
def test_factory_truth_table(coin, bits, want_out, want_used):
    src = FixedSource(bits1=bits)
    got = bernoulli_factory_pq(src, 0, ScriptedCoin([coin]))
    assert got == want_out
    assert src.ledger.n_pop1 == want_used


def test_factory_success_always_costs_two_inputs():
    # scan every (coin, x1, x2) combination: output 1 => exactly 2 draws
    for coin in (0, 1):
        for x1 in (0, 1):
            for x2 in (0, 1):
                src = FixedSource(bits1=[x1, x2])
                out = bernoulli_factory_pq(src, 0, ScriptedCoin([coin]))
                if out == 1:
                    assert src.ledger.n_pop1 == 2


def test_factory_output_rate_smoke():
    # p(1-p) at p = 0.3, 4 sigma band
    src = SyntheticSource(0.3, 0.5, master_seed=101)
    gen = src.substream(TAG_FACTORY_POP1)
    n = 20_000
    hits = sum(bernoulli_factory_pq(src, 0, gen) for _ in range(n))
    q = 0.3 * 0.7
    se = (q * (1 - q) / n) ** 0.5
    assert abs(hits / n - q) < 4 * se


# ------------------------------------------------------------- the parser


def run_parser_whole(bits, crit, need):
    return _factory_parse_py(bits, 0, len(bits), crit, 0, len(crit), need, 0, 0)


def test_parser_scripted_example():
    # crit 0 with x1=1,x2=0 -> success; crit 1 with x1=1 -> failure;
    # crit 0 with x1=0 -> failure; crit 1 with x1=0,x2=1 -> success
    bits = np.array([1, 0, 1, 0, 0, 1], dtype=np.uint8)
    crit = np.array([0, 1, 0, 1], dtype=np.uint8)
    pos, cpos, out, suc, pending, _ = run_parser_whole(bits, crit, 2)
    assert (pos, cpos, out, suc, pending) == (6, 4, 4, 2, 0)


def test_parser_stops_at_need():
    bits = np.array([1, 0, 1, 0, 1, 0], dtype=np.uint8)
    crit = np.zeros(3, dtype=np.uint8)
    pos, cpos, out, suc, pending, _ = run_parser_whole(bits, crit, 1)
    assert (out, suc) == (1, 1)
    assert pos == 2 and cpos == 1


def test_parser_carries_half_finished_output():
    bits = np.array([1], dtype=np.uint8)  # c=0, x1=1: second draw missing
    crit = np.array([0], dtype=np.uint8)
    pos, cpos, out, suc, pending, pc = run_parser_whole(bits, crit, 1)
    assert (out, suc, pending, pc) == (0, 0, 1, 0)
    # resume with the second draw
    more = np.array([0], dtype=np.uint8)
    pos, cpos, out, suc, pending, pc = _factory_parse_py(
        more, 0, 1, crit, 1, 1, 1, pending, pc
    )
    assert (out, suc, pending) == (1, 1, 0)


@given(
    data=st.data(),
    nbits=st.integers(0, 120),
    need=st.integers(1, 12),
)
@settings(max_examples=150, deadline=None)
def test_parser_split_invariance(data, nbits, need):
    # cutting the input or criterion windows anywhere must not change
    # the totals: same consumed counts, outputs, successes
    bits = np.array(
        data.draw(st.lists(st.integers(0, 1), min_size=nbits, max_size=nbits)),
        dtype=np.uint8,
    )
    crit = np.array(
        data.draw(st.lists(st.integers(0, 1), min_size=80, max_size=80)),
        dtype=np.uint8,
    )
    whole = run_parser_whole(bits, crit, need)

    cut = data.draw(st.integers(0, nbits))
    pos, cpos, out, suc, pending, pc = _factory_parse_py(
        bits, 0, cut, crit, 0, len(crit), need, 0, 0
    )
    if suc < need:
        pos, cpos, out2, suc2, pending, pc = _factory_parse_py(
            bits, pos, len(bits), crit, cpos, len(crit), need - suc, pending, pc
        )
        out += out2
        suc += suc2
    assert (pos, cpos, out, suc) == whole[:4]


@given(
    nbits=st.integers(0, 200),
    seed=st.integers(0, 10_000),
    need=st.integers(1, 10),
)
@settings(max_examples=100, deadline=None)
def test_parser_compiled_matches_python(nbits, seed, need):
    if _factory_parse is _factory_parse_py:
        pytest.skip("compiled parser unavailable")
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, size=nbits).astype(np.uint8)
    crit = rng.integers(0, 2, size=max(1, nbits)).astype(np.uint8)
    got = _factory_parse(bits, 0, len(bits), crit, 0, len(crit), need, 0, 0)
    want = _factory_parse_py(bits, 0, len(bits), crit, 0, len(crit), need, 0, 0)
    assert tuple(got) == tuple(want)


def test_factory_ibs_window_path_matches_per_draw_path():
    for p, need, seed in ((0.4, 10, 5), (0.05, 4, 6), (0.9, 8, 7)):
        fast = SyntheticSource(p, 0.5, master_seed=seed)
        crit = _CritBits(fast.substream(TAG_FACTORY_POP1))
        out_fast, raw_fast = _factory_ibs(fast, 0, need, crit, 10**9)

        slow = SyntheticSource(p, 0.5, master_seed=seed)
        coin = LowBitStream(slow.substream(TAG_FACTORY_POP1))
        outputs = 0
        succ = 0
        while succ < need:
            succ += bernoulli_factory_pq(slow, 0, coin)
            outputs += 1
        assert (out_fast, raw_fast) == (outputs, slow.ledger.n_pop1)
        assert fast.ledger.n_pop1 == raw_fast


def test_factory_ibs_draw_cap():
    src = SyntheticSource(1e-7, 0.5, master_seed=1)
    crit = _CritBits(src.substream(TAG_FACTORY_POP1))
    with pytest.raises(DrawCapExceeded):
        _factory_ibs(src, 0, 5, crit, 20_000)


# ---------------------------------------------------------------- stages


def test_stage1_scripted_rr():
    design = derive_design(0.2, 1.0, RR)
    assert (design.suf1, design.suf2) == (3, 5)
    src = FixedSource(
        bits1=[0, 1, 1, 0, 1],  # 3rd success on draw 5
        bits2=[1, 1, 0, 1, 0, 1, 0, 0, 1],  # 5th success on draw 9
    )
    s1 = run_stage1(RR, design, src)
    assert (s1.vasaf1, s1.vasaf2) == (5, 9)
    assert (s1.raw1, s1.raw2) == (5, 9)
    assert s1.varaf == pytest.approx((9 - 0.5) / (5 - 0.5))


def test_stage2_plain_kinds():
    src = FixedSource(bits1=[1, 0, 1], bits2=[0, 1, 1, 0, 1])
    counts = run_stage2(RR, SecondStageParams(2, 3), src)
    assert (counts.m1, counts.m2) == (3, 5)
    assert counts.split is None


def test_stage2_transformed_order_and_split():
    # or at sus = (3, 3): successes(3) then failures(1) on pop 1;
    #                     successes(1) then failures(3) on pop 2
    src = FixedSource(
        bits1=[1, 0, 1, 1] + [1, 0],  # 3rd success on draw 4; 1st failure on draw 2
        bits2=[0, 1] + [0, 1, 1, 0, 1, 0],  # 1st success on draw 2; 3rd failure on draw 6
    )
    counts = run_stage2(OR, SecondStageParams(3, 3), src)
    assert counts.split == (4, 2, 2, 6)
    assert (counts.m1, counts.m2) == (6, 8)
    assert src.ledger.n_pop1 == 6 and src.ledger.n_pop2 == 8


# ------------------------------------------------------- point estimates


def test_point_estimate_rr():
    got = point_estimate(RR, SecondStageParams(10, 5), Stage2Counts(m1=20, m2=30))
    assert got == pytest.approx(9 * 30 / (5 * 19), rel=1e-15)


def test_point_estimate_lrr():
    got = point_estimate(LRR, SecondStageParams(3, 3), Stage2Counts(m1=5, m2=7))
    # H6 - H4 + H2 - H2 = 1/5 + 1/6
    assert got == pytest.approx(11.0 / 30.0, rel=1e-12)


def test_point_estimate_or():
    counts = Stage2Counts(m1=11, m2=13, split=(6, 5, 4, 9))
    got = point_estimate(OR, SecondStageParams(4, 4), counts)
    assert got == pytest.approx(3 * 3 * 5 * 4 / (2 * 2 * 5 * 8), rel=1e-15)


def test_point_estimate_lor():
    counts = Stage2Counts(m1=11, m2=13, split=(6, 5, 4, 9))
    got = point_estimate(LOR, SecondStageParams(4, 4), counts)
    # H4 - H5 + H3 - H8, hand-reduced
    assert got == pytest.approx(-1.0845238095238096, rel=1e-12)


def test_log_estimates_match_harmonic_identity():
    # the two log estimators are the entrywise log-transforms of the
    # count ratios up to harmonic differences; spot-check coherence
    assert harmonic(6) - harmonic(4) == pytest.approx(1 / 5 + 1 / 6, rel=1e-12)


# ------------------------------------------------------------ end to end


def test_estimate_ledger_accounting():
    for kind in (RR, LRR, OR, LOR):
        design = derive_design(0.1, 1.0, kind)
        src = SyntheticSource(0.35, 0.15, master_seed=9)
        res = estimate(kind, design, src)
        assert res.ledger.stage1 == (res.stage1.raw1, res.stage1.raw2)
        assert res.ledger.stage2 == (res.counts.m1, res.counts.m2)
        assert res.ledger.n_pop1 == res.stage1.raw1 + res.counts.m1
        assert res.groups is None and res.discarded is None
        if kind.transformed:
            m1p, m1pp, m2p, m2pp = res.counts.split
            assert m1p + m1pp == res.counts.m1
            assert m2p + m2pp == res.counts.m2
        else:
            assert (res.stage1.vasaf1, res.stage1.vasaf2) == res.ledger.stage1


def test_estimate_is_reproducible():
    kind = OR
    design = derive_design(0.05, 1.5, kind)
    a = estimate(kind, design, SyntheticSource(0.2, 0.4, master_seed=31, cell=4, rep=7))
    b = estimate(kind, design, SyntheticSource(0.2, 0.4, master_seed=31, cell=4, rep=7))
    assert a.value == b.value
    assert a.ledger == b.ledger
    assert a.varaf == b.varaf and (a.sus1, a.sus2) == (b.sus1, b.sus2)


def test_estimate_pool_matches_fresh_generators():
    from seqratio.rng import StreamPool

    kind = LOR
    design = derive_design(0.1, 1.0, kind)
    plain = estimate(kind, design, SyntheticSource(0.3, 0.2, master_seed=8, rep=3))
    pooled = estimate(
        kind, design, SyntheticSource(0.3, 0.2, master_seed=8, rep=3, pool=StreamPool())
    )
    assert plain.value == pooled.value
    assert plain.ledger == pooled.ledger


def test_estimate_respects_draw_cap():
    design = derive_design(0.2, 1.0, RR)
    src = SyntheticSource(1e-8, 0.5, master_seed=0)
    with pytest.raises(DrawCapExceeded) as exc:
        estimate(RR, design, src, cap=50_000)
    assert exc.value.pop == 0


def test_second_stage_targets_come_from_the_recorded_ratio():
    # the solver input is exactly the stage-1 statistic in the result
    from seqratio.design import round_sus, solve_sus
    from seqratio.rng import TAG_ROUNDING

    kind = RR
    design = derive_design(0.05, 1.0, kind)
    src = SyntheticSource(0.25, 0.1, master_seed=17)
    res = estimate(kind, design, src)
    real = solve_sus(design, res.varaf)
    assert real.sus1_real == res.sus1_real
    assert real.sus2_real == res.sus2_real
    replay = round_sus(
        real, design, SyntheticSource(0.25, 0.1, master_seed=17).substream(TAG_ROUNDING)
    )
    assert (replay.sus1, replay.sus2) == (res.sus1, res.sus2)
