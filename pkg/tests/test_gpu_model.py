"""Bank-conflict simulator, swizzles, fragments, rooflines, padding."""

import pytest

from sumfact.gpu_model import (
    BANK_SCENARIOS,
    AccessPattern,
    bank_scenario,
    bank_trace,
    mma_fragment_pattern,
    padding_cost,
    roofline,
    row_major_layout,
    search_conflict_free_swizzle,
    shared_bandwidth,
    vram_roofline,
    xor_swizzle_layout,
)


def single_phase_pattern(rows, cols, word_bytes, lanes, access_bytes=None):
    return AccessPattern(
        rows, cols, word_bytes, access_bytes or word_bytes, [lanes]
    )


# -------------------------------------------------------------- bank trace


def test_distinct_banks_single_wavefront():
    layout = row_major_layout(1, 32, 4)
    pattern = single_phase_pattern(1, 32, 4, [(0, i) for i in range(32)])
    report = bank_trace(layout, pattern)
    assert report.phase_wavefronts == [1]
    assert not report.has_conflict


def test_broadcast_single_wavefront():
    layout = row_major_layout(1, 32, 4)
    pattern = single_phase_pattern(1, 32, 4, [(0, 0)] * 32)
    report = bank_trace(layout, pattern)
    assert report.phase_wavefronts == [1]


def test_stride_two_words_conflict():
    # 32 lanes striding by 2 words: two distinct words per bank
    layout = row_major_layout(2, 32, 4)
    lanes = [(i // 16, (2 * i) % 32) for i in range(32)]
    report = bank_trace(layout, single_phase_pattern(2, 32, 4, lanes))
    assert report.phase_wavefronts == [2]
    assert report.has_conflict


def test_out_of_tile_access_raises():
    layout = row_major_layout(4, 4, 4)
    pattern = single_phase_pattern(4, 4, 4, [(0, 5)])
    with pytest.raises(IndexError):
        bank_trace(layout, pattern)


def test_fp64_naive_has_two_way_conflict_phase():
    pattern = mma_fragment_pattern((8, 8, 4), "fp64", "A")
    layout = row_major_layout(8, 8, 8)
    report = bank_trace(layout, pattern)
    assert 2 in report.phase_wavefronts
    assert report.has_conflict


# ----------------------------------------------------------------- layouts


def test_identity_group_is_row_major():
    layout = xor_swizzle_layout(8, 8, 8, 1)
    ref = row_major_layout(8, 8, 8)
    for r in range(8):
        for c in range(8):
            assert layout.address(r, c) == ref.address(r, c)


@pytest.mark.parametrize("rows,cols", [(8, 8), (16, 16)])
@pytest.mark.parametrize("G", [1, 2, 4, 8])
def test_swizzle_bijection_exhaustive(rows, cols, G):
    layout = xor_swizzle_layout(rows, cols, 4, G)
    assert layout.is_bijection()


def test_swizzle_parameter_validation():
    with pytest.raises(ValueError):
        xor_swizzle_layout(8, 8, 4, 3)
    with pytest.raises(ValueError):
        xor_swizzle_layout(8, 8, 4, 16)
    with pytest.raises(ValueError):
        xor_swizzle_layout(8, 12, 4, 2)  # non-power-of-two columns


# ------------------------------------------------------------------ search


def test_search_returns_identity_when_already_clean():
    pattern = single_phase_pattern(1, 32, 4, [(0, i) for i in range(32)])
    layout = search_conflict_free_swizzle(pattern, 1, 32, 4)
    assert layout is not None
    assert layout.swizzle_group == 1


def test_search_finds_fp64_swizzle():
    pattern = mma_fragment_pattern((8, 8, 4), "fp64", "A")
    layout = search_conflict_free_swizzle(pattern, 8, 8, 8)
    assert layout is not None
    report = bank_trace(layout, pattern)
    assert report.phase_wavefronts == [1, 1]
    assert layout.is_bijection()


def test_search_finds_fp16_swizzle():
    pattern = mma_fragment_pattern((16, 8, 16), "fp16", "A")
    layout = search_conflict_free_swizzle(pattern, 16, 16, 2)
    assert layout is not None
    assert bank_trace(layout, pattern).phase_wavefronts == [1]


def test_search_absence_is_valid():
    # a single-column tile leaves no XOR freedom, and striding every other
    # row lands rows r and r+16 in the same bank: unfixable
    pattern = single_phase_pattern(64, 1, 4, [(2 * r, 0) for r in range(32)])
    layout = search_conflict_free_swizzle(pattern, 64, 1, 4)
    assert layout is None


# --------------------------------------------------------------- fragments


def test_fp64_fragment_phase_counts():
    a = mma_fragment_pattern((8, 8, 4), "fp64", "A")
    assert len(a.phases) == 2
    b = mma_fragment_pattern((8, 8, 4), "fp64", "B")
    assert len(b.phases) == 2
    c = mma_fragment_pattern((8, 8, 4), "fp64", "C")
    assert len(c.phases) == 1


@pytest.mark.parametrize(
    "shape,precision", [((8, 8, 4), "fp64"), ((16, 8, 16), "fp16")]
)
@pytest.mark.parametrize("role", ["A", "B", "C"])
def test_fragment_lane_bounds_and_coverage(shape, precision, role):
    pattern = mma_fragment_pattern(shape, precision, role)
    for phase in pattern.phases:
        assert len(phase) <= 32
    cov = pattern.coverage()
    assert len(cov) == pattern.rows * pattern.cols
    assert set(cov.values()) == {1}  # whole fragment exactly once


def test_fragment_rejects_unknown_shape():
    with pytest.raises(ValueError):
        mma_fragment_pattern((4, 4, 4), "fp64", "A")
    with pytest.raises(ValueError):
        mma_fragment_pattern((8, 8, 4), "fp64", "D")


# --------------------------------------------------------------- scenarios


def test_scenarios_reproduce_conflict_story():
    naive = bank_scenario("fp64-naive")
    assert any(2 in r.phase_wavefronts for r in naive)
    clean = bank_scenario("fp64-swizzled")
    assert all(all(w == 1 for w in r.phase_wavefronts) for r in clean)
    assert any(bank_scenario("fp16-naive")[i].has_conflict for i in range(3))
    assert not any(r.has_conflict for r in bank_scenario("fp16-swizzled"))


def test_scenario_name_validation():
    with pytest.raises(ValueError):
        bank_scenario("int8-naive")
    assert len(BANK_SCENARIOS) == 4


# ---------------------------------------------------------------- rooflines


def test_shared_bandwidth_values():
    assert shared_bandwidth(1, 1, 4, 1.0) == pytest.approx(0.004)
    assert shared_bandwidth(108, 32, 4, 1.27) == pytest.approx(17.556, abs=5e-4)
    assert shared_bandwidth(108, 64, 4, 1.27) == pytest.approx(2 * 17.55648)


def test_roofline_formula():
    B = shared_bandwidth(108, 32, 4, 1.27)
    assert roofline(B, 1.0, 0.5, 0.5) == pytest.approx(B)
    assert roofline(10.0, 200.0, 50.0, 50.0) == pytest.approx(20.0)
    with pytest.raises(ValueError):
        roofline(10.0, 1.0, 0.0, 0.0)


def test_vram_roofline_regimes():
    assert vram_roofline(19.5, 2.0, 100.0) == pytest.approx(19.5)
    assert vram_roofline(312.0, 2.0, 1.0) == pytest.approx(2.0)
    assert vram_roofline(312.0, 2.0, 156.0) == pytest.approx(312.0)


def test_roofline_monotone_in_traffic():
    vals = [roofline(17.556, 100.0, r, 10.0) for r in (10.0, 20.0, 40.0)]
    assert vals[0] > vals[1] > vals[2]


# ------------------------------------------------------------------ padding


def test_padding_identity_at_supported_size():
    assert padding_cost(16, [8, 16]) == (16, 1.0)
    assert padding_cost(8, [8, 16]) == (8, 1.0)


def test_padding_maps_range_to_sixteen():
    for n in range(10, 17):
        padded, ratio = padding_cost(n, [8, 16])
        assert padded == 16
        assert ratio == pytest.approx((16 / n) ** 4)


def test_padding_ratio_decreases_towards_boundary():
    ratios = [padding_cost(n, [8, 16])[1] for n in range(9, 17)]
    assert all(r0 > r1 for r0, r1 in zip(ratios, ratios[1:]))


def test_padding_guards():
    with pytest.raises(ValueError):
        padding_cost(20, [8, 16])
    with pytest.raises(ValueError):
        padding_cost(4, [])
