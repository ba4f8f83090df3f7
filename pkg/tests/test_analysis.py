import io
from collections import Counter

import pytest

from cachetrace.analysis import (
    AnalysisError,
    band_of,
    bands_csv,
    classify_bands,
    count_accesses,
    export_scatter,
    read_log,
    stride_csv,
    stride_table_for_address,
    summarize_frequencies,
    summary_csv,
    write_log,
)

A, B = 0x1000, 0x2000


def _log(pairs, level="L1D"):
    return [(level, c, a) for c, a in pairs]


def test_empty_log():
    assert count_accesses([]) == Counter()


def test_counts():
    assert count_accesses(_log([(1, A), (2, A), (3, B)])) == {A: 2, B: 1}


def test_level_filter():
    log = _log([(1, A)]) + _log([(2, A)], "LLC")
    assert count_accesses(log, "LLC") == {A: 1}


def test_paper_frequency_buckets():
    table = Counter()
    table.update({i: 1 for i in range(1428)})
    table.update({10_000 + i: 128 for i in range(303_875)})
    table.update({1_000_000 + i: 7 for i in range(4696)})
    s = summarize_frequencies(table, 128)
    assert (s.once, s.special, s.other, s.total) == (1428, 303_875, 4696, 309_999)
    # 303875/309999 = 98.0245..., so the expected value is checked to 1e-3
    assert s.percentage("once") == pytest.approx(0.461, abs=1e-3)
    assert s.percentage("special") == pytest.approx(98.024, abs=1e-3)
    assert s.percentage("other") == pytest.approx(1.515, abs=1e-3)


def test_single_address_once():
    s = summarize_frequencies(Counter({A: 1}), 128)
    assert [p for _, _, p in s.rows()] == [100.0, 0.0, 0.0]


def test_uniform_t_bucket():
    s = summarize_frequencies(Counter({64 * i: 128 for i in range(64)}), 128)
    assert s.percentage("special") == 100.0


def test_t_equal_one_buckets_coincide():
    s = summarize_frequencies(Counter({A: 1, B: 3}), 1)
    assert s.once == s.special == 1 and s.other == 1


def test_bad_special_count():
    with pytest.raises(AnalysisError):
        summarize_frequencies(Counter(), 0)


def test_paper_stride_rows():
    rows = stride_table_for_address(_log([(13_868_707, A), (22_092_689, A)]), A)
    assert rows[0].delta_to_next == 8_223_982
    assert rows[-1].delta_to_next is None


def test_equal_cycles_give_zero_delta():
    assert stride_table_for_address(_log([(10, A), (10, A)]), A)[0].delta_to_next == 0


def test_stride_needs_two_sightings():
    with pytest.raises(AnalysisError):
        stride_table_for_address(_log([(1, A)]), A)
    with pytest.raises(AnalysisError):
        stride_table_for_address([], A)


def test_stride_sum_telescopes():
    cycles = [5, 17, 17, 40, 1000]
    rows = stride_table_for_address(_log([(c, A) for c in cycles]), A)
    assert sum(r.delta_to_next for r in rows[:-1]) == cycles[-1] - cycles[0]
    assert stride_csv(rows).splitlines()[-1] == "1000,"


def test_token_array_band():
    base = 0x32D6544
    end = base + 151_936 * 24
    assert end == 0x3650944
    # every element touched once, plus the one-past-the-end address
    table = Counter(range(base, end + 1, 24))
    bands = classify_bands(table, 1 << 20)
    assert len(bands) == 1
    assert (bands[0].low_address, bands[0].high_address) == (base, end)
    assert band_of(bands, 0x32E8910) is bands[0]


def test_single_address_band():
    assert len(classify_bands(Counter({A: 5}))) == 1


@pytest.mark.parametrize("k", [6, 20, 39])
def test_far_addresses_split(k):
    bands = classify_bands(Counter({0: 1, 1 << 40: 1}), 1 << k)
    assert len(bands) == 2
    assert bands[0].high_address < bands[1].low_address


def test_adjacent_groups_merge():
    g = 1 << 20
    table = Counter({g - 8: 2, g + 8: 3, 5 * g: 1})
    bands = classify_bands(table, g)
    assert [(b.address_count, b.total_accesses) for b in bands] == [(2, 5), (1, 1)]
    assert bands_csv(bands).splitlines()[0] == "band_id,low_address,high_address,total_accesses,address_count"


def test_granularity_power_of_two():
    with pytest.raises(AnalysisError):
        classify_bands(Counter({A: 1}), 3000)


def test_scatter_window():
    log = _log([(0, A), (0, B), (1, A), (5, B)])
    assert export_scatter(log, 0, 1) == [(0, A), (0, B)]
    assert export_scatter(log, 2, 5) == []
    with pytest.raises(AnalysisError):
        export_scatter(log, 3, 3)


def test_scatter_windows_tile():
    log = _log([(c, A + c) for c in range(0, 100, 3)])
    pieces = [p for s in range(0, 100, 10) for p in export_scatter(log, s, s + 10)]
    assert pieces == [(c, a) for _, c, a in log]


def test_log_csv_round_trip():
    entries = [("L1D", 3, 0x7FFC00000008), ("LLC", 9, 0x40)]
    buf = io.StringIO()
    write_log(buf, entries)
    assert buf.getvalue().splitlines() == ["level,cycle,address", "L1D,3,0x7ffc00000008", "LLC,9,0x40"]
    buf.seek(0)
    assert [tuple(e) for e in read_log(buf)] == entries


def test_log_header_checked():
    with pytest.raises(AnalysisError):
        list(read_log(io.StringIO("a,b,c\n")))


def test_summary_csv_format():
    text = summary_csv(summarize_frequencies(Counter({A: 1, B: 128}), 128))
    assert text.splitlines() == ["bucket,addresses,percentage", "1,1,50.000", "128,1,50.000", "other,0,0.000"]
