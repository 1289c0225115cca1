import numpy as np
import pytest
from scipy import integrate

from polarofdm import construction as cons
from polarofdm.construction import DiscreteBms


def biawgn_capacity(sigma):
    """1 - E[log2(1 + exp(-L))], L ~ N(2/s^2, 4/s^2), on a dense grid (10^6 points)."""
    m = 2.0 / sigma ** 2
    sd = 2.0 / sigma
    x = np.linspace(m - 40 * sd, m + 40 * sd, 1_000_001)
    pdf = np.exp(-0.5 * ((x - m) / sd) ** 2) / (sd * np.sqrt(2 * np.pi))
    loss = np.logaddexp(0.0, -x) / np.log(2)
    return 1.0 - integrate.trapezoid(pdf * loss, x)


def rayleigh_pe(sigma):
    g = 1.0 / (2 * sigma ** 2)
    return 0.5 * (1 - np.sqrt(g / (1 + g)))


def bsc_pair_transform(p):
    """Exact four synthesized channels of a BSC at N=4, as output lists."""
    w = {0: [(1 - p, p), (p, 1 - p)]}

    def minus(ch):
        out = []
        for y1 in ch:
            for y2 in ch:
                out.append((0.5 * (y1[0] * y2[0] + y1[1] * y2[1]), 0.5 * (y1[1] * y2[0] + y1[0] * y2[1])))
        return out

    def plus(ch):
        out = []
        for y1 in ch:
            for y2 in ch:
                for u1 in (0, 1):
                    out.append((0.5 * y1[u1] * y2[0], 0.5 * y1[u1 ^ 1] * y2[1]))
        return out

    def pe(ch):
        return 0.5 * sum(min(a, b) for a, b in ch)

    c = w[0]
    assert pe(c) == pytest.approx(p)
    return [pe(minus(minus(c))), pe(plus(minus(c))), pe(minus(plus(c))), pe(plus(plus(c)))]


def test_discrete_bms_is_a_channel():
    ch = cons.quantize_rayleigh(0.8, 64)
    rows = ch.output_pairs()
    assert rows[:, 0].sum() == pytest.approx(1.0, abs=1e-12)
    assert rows[:, 1].sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(ch.log_a >= ch.log_b)


def test_bsc_is_fixed_point_of_merge():
    bsc = DiscreteBms.bsc(0.1)
    out = cons.degrading_merge(bsc, 2)
    assert out.capacity() == pytest.approx(bsc.capacity(), abs=1e-15)
    assert out.error_probability() == pytest.approx(0.1)


def test_merge_returns_small_channels_unchanged_and_never_gains_capacity(rng):
    pairs = rng.random((40, 2))
    pairs /= pairs.sum(axis=0)
    ch = DiscreteBms.from_pairs(pairs * 0.5)
    assert cons.degrading_merge(ch, 80) is ch
    prev = ch.capacity()
    for mu in (64, 32, 16, 8, 4, 2):
        c = cons.degrading_merge(ch, mu).capacity()
        assert c <= prev + 1e-12
        assert cons.degrading_merge(ch, mu).n_outputs <= mu


def test_n4_bsc_bounds_match_hand_transform():
    exact = bsc_pair_transform(0.1)
    got = np.exp(cons.bit_channel_log_bounds(DiscreteBms.bsc(0.1), 4, 512))
    np.testing.assert_allclose(got, exact, rtol=1e-12)
    assert int(np.argmax(got)) == 0 and int(np.argmin(got)) == 3


def test_awgn_quantizer_capacity():
    for s in (0.5, 1.0, 2.0):
        assert cons.quantize_awgn(s, 512).capacity() <= biawgn_capacity(s) + 1e-12
    assert cons.quantize_awgn(1.0, 512).capacity() == pytest.approx(biawgn_capacity(1.0), abs=1e-3)
    assert cons.quantize_awgn(0.02, 512).error_probability() < 1e-100


def test_rayleigh_quantizer():
    for s in (0.4, 0.8, 1.5):
        assert cons.quantize_rayleigh(s, 256).capacity() < cons.quantize_awgn(s, 256).capacity()
        pe = cons.quantize_rayleigh(s, 512).error_probability()
        assert pe == pytest.approx(rayleigh_pe(s), abs=1e-3)


def test_quantizers_reject_bad_arguments():
    with pytest.raises(ValueError):
        cons.quantize_awgn(0.0)
    with pytest.raises(ValueError):
        cons.quantize_rayleigh(-1.0)
    with pytest.raises(ValueError):
        cons.quantize_awgn(1.0, 7)


def test_construct_frozen_set_edges():
    base = cons.quantize_awgn(0.8, 64)
    assert cons.construct_frozen_set(base, 16, 16, 64) == ()
    with pytest.raises(ValueError):
        cons.construct_frozen_set(base, 12, 6)
    with pytest.raises(ValueError):
        cons.construct_frozen_set(base, 16, 0)


def test_selection_minimises_bound_sum(rng):
    bounds = cons.bit_channel_log_bounds(cons.quantize_awgn(0.9, 64), 32, 64)
    info = cons.select_info_set(bounds, 12)
    chosen = np.sort(np.exp(bounds[info]))
    assert np.sum(chosen) == pytest.approx(np.sum(np.sort(np.exp(bounds))[:12]))


def test_construction_is_deterministic():
    base = cons.quantize_rayleigh(0.7, 128)
    assert cons.construct_frozen_set(base, 64, 32, 128) == cons.construct_frozen_set(base, 64, 32, 128)


def test_higher_snr_dominates_indexwise():
    lo = cons.bit_channel_log_bounds(cons.quantize_awgn(1.0, 128), 64, 128)
    hi = cons.bit_channel_log_bounds(cons.quantize_awgn(0.7, 128), 64, 128)
    assert np.all(hi <= lo + 1e-9)


def test_mu_fidelity_self_consistency():
    s = cons.design_sigma(1.0)
    a = set(cons.construct_frozen_set(cons.quantize_rayleigh(s, 512), 256, 128, 512))
    b = set(cons.construct_frozen_set(cons.quantize_rayleigh(s, 2048), 256, 128, 2048))
    assert len(a & b) / len(a) >= 0.95


def test_monte_carlo_zero_noise():
    rel = cons.monte_carlo_reliabilities(0.0, "awgn", 16, 100)
    assert all(r.error_prob_upper == 0 for r in rel)
    assert [r.index for r in rel] == list(range(16))


@pytest.mark.slow
def test_frozen_set_matches_genie_monte_carlo_n64():
    sigma = np.sqrt(1 / (2 * 10 ** 0.2))   # Es/N0 = 2 dB
    tv = set(cons.construct_frozen_set(cons.quantize_awgn(sigma, 512), 64, 32, 512))
    rel = cons.monte_carlo_reliabilities(sigma, "awgn", 64, 1_000_000, seed=3)
    pe = np.array([r.error_prob_upper for r in rel])
    mc = set(np.argsort(-pe, kind="stable")[:32].tolist())
    assert len(tv & mc) / 32 >= 0.9
    # upper bounds dominate the Monte-Carlo estimates up to sampling error
    bounds = np.exp(cons.bit_channel_log_bounds(cons.quantize_awgn(sigma, 512), 64, 512))
    se = np.sqrt(pe * (1 - pe) / 1_000_000)
    assert np.all(bounds >= pe - 4 * se - 1e-6)


def test_cache_roundtrip_is_byte_identical(tmp_path):
    a = cons.cached_frozen_set("awgn", 2.0, 64, 40, 64, tmp_path)
    path = cons.cache_path(tmp_path, "awgn", 2.0, 64, 40, 64)
    first = path.read_bytes()
    cons.write_frozen_file(path, a, kind="awgn", ebn0_db=2.0, n=64, k=40, mu=64)
    assert path.read_bytes() == first
    assert cons.read_frozen_file(path) == a
    assert first.startswith(b"# kind=awgn")
    assert len(a) == 24


def _awgn_ber(spec, ebn0_db, blocks, rng):
    from polarofdm import polar
    sigma = np.sqrt(1 / (2 * 0.5 * 10 ** (ebn0_db / 10)))
    errs = 0
    for _ in range(blocks):
        info = rng.integers(0, 2, spec.n_info, dtype=np.uint8)
        y = 1 - 2.0 * polar.encode(info, spec) + sigma * rng.standard_normal(spec.n_bits)
        errs += np.count_nonzero(polar.ca_scl_decode(2 * y / sigma ** 2, spec)[0] != info)
    return errs / (blocks * spec.n_info)


@pytest.mark.slow
def test_monte_carlo_code_within_03db_of_tal_vardy_code():
    from polarofdm.polar import PolarCodeSpec
    design = 2.0
    sigma = cons.design_sigma(design)
    tv = PolarCodeSpec(1024, 528, cons.construct_frozen_set(cons.quantize_awgn(sigma), 1024, 528))
    rel = cons.monte_carlo_reliabilities(sigma, "awgn", 1024, 100_000, seed=4, batch=5000)
    pe = np.array([r.error_prob_upper for r in rel])
    mc_info = np.lexsort((np.arange(1024), pe))[:528]
    mc = PolarCodeSpec.from_info_set(1024, mc_info)
    pts = [1.0, 1.5, 2.0]
    rng = np.random.default_rng(21)
    b_tv = [_awgn_ber(tv, p, 400, rng) for p in pts]
    b_mc = [_awgn_ber(mc, p, 400, rng) for p in pts]
    # compare the Eb/N0 at which each curve crosses 1e-3
    from polarofdm.harness import threshold_interpolate
    x_tv = threshold_interpolate(list(zip(pts, b_tv)), 1e-3)
    x_mc = threshold_interpolate(list(zip(pts, b_mc)), 1e-3)
    assert abs(x_tv - x_mc) <= 0.3
