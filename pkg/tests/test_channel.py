import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from amcqueue import RateTable, TransmissionModel, capacity_packets, rate_id_for_snr, transmit_count_pmf
from amcqueue.channel import ChannelModel, RateRow, mixed_transmit_pmf
from amcqueue.errors import StructuralError

from oracles import binomial_enumeration

LITERAL = "paper_literal"
ATTEMPTED = "attempted_only"


def test_default_table_values():
    table = RateTable.default()
    assert [r.snr_threshold_db for r in table.rows] == [6.4, 9.4, 11.2, 16.4, 18.2, 22.7, 24.4]
    assert [r.bits_per_symbol for r in table.rows] == [0.5, 1, 1.5, 2, 3, 4, 4.5]
    assert table.rows[3].modulation == "16QAM (1/2)"


def test_table_rejects_nonmonotone():
    with pytest.raises(StructuralError):
        RateTable((RateRow(0, "a", 1.0, 5.0), RateRow(1, "b", 2.0, 5.0)))
    with pytest.raises(StructuralError):
        RateTable((RateRow(0, "a", 1.0, 5.0), RateRow(1, "b", 1.0, 6.0)))


@pytest.mark.parametrize(
    "gamma, expected",
    [(5.0, None), (6.39, None), (6.4, 0), (16.4, 3), (16.39, 2), (24.4, 6), (100.0, 6)],
)
def test_rate_id_for_snr(gamma, expected):
    assert rate_id_for_snr(gamma) == expected


def test_capacity():
    model = TransmissionModel(10)
    assert capacity_packets(0, model) == 10
    assert capacity_packets(6, model) == 10 * 4.5 / 0.5 == 90
    assert capacity_packets(None, model) == 0
    with pytest.raises(StructuralError):
        capacity_packets(7, model)


def test_capacity_floors():
    table = RateTable((RateRow(0, "a", 3.0, 1.0), RateRow(1, "b", 4.0, 2.0)))
    assert capacity_packets(1, TransmissionModel(2), table) == 2  # floor(8/3)


@pytest.mark.parametrize("b", [1, 3, 10, 150])
def test_capacity_monotone(b):
    model = TransmissionModel(b)
    caps = [capacity_packets(n, model) for n in range(7)]
    assert caps == sorted(caps)
    assert all(capacity_packets(n, TransmissionModel(b + 1)) >= c for n, c in enumerate(caps))


def test_empty_queue_pmf():
    np.testing.assert_array_equal(transmit_count_pmf(0, 5, TransmissionModel(1, 0.7)), [1.0])


@pytest.mark.parametrize("mode", [LITERAL, ATTEMPTED])
def test_certain_success_saturates(mode):
    np.testing.assert_allclose(transmit_count_pmf(5, 3, TransmissionModel(1, 1.0, mode)), [0, 0, 0, 1])


def test_binomial_half():
    np.testing.assert_allclose(transmit_count_pmf(2, 2, TransmissionModel(1, 0.5)), [0.25, 0.5, 0.25])
    np.testing.assert_allclose(transmit_count_pmf(2, 7, TransmissionModel(1, 0.5)), [0.25, 0.5, 0.25])


@pytest.mark.parametrize("mode", [LITERAL, ATTEMPTED])
@pytest.mark.parametrize("x, D, p", [(7, 3, 0.3), (12, 12, 0.8), (4, 9, 0.5), (30, 5, 0.05)])
def test_matches_enumeration(mode, x, D, p):
    got = transmit_count_pmf(x, D, TransmissionModel(1, p, mode))
    np.testing.assert_allclose(got, binomial_enumeration(x, D, p, mode == LITERAL), atol=1e-14)


@pytest.mark.parametrize("p", [0.01, 0.5, 0.99])
@pytest.mark.parametrize("mode", [LITERAL, ATTEMPTED])
def test_normalization_grid(p, mode):
    model = TransmissionModel(1, p, mode)
    for x in range(0, 201, 7):
        for D in range(0, 201, 9):
            assert abs(transmit_count_pmf(x, D, model).sum() - 1.0) <= 1e-12
    for x, D in [(200, 200), (200, 0), (0, 200), (199, 200), (200, 199)]:
        assert abs(transmit_count_pmf(x, D, model).sum() - 1.0) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 120), st.integers(0, 120), st.floats(0.01, 1.0), st.floats(0.01, 1.0),
       st.sampled_from([LITERAL, ATTEMPTED]))
def test_success_dominance(x, D, p1, p2, mode):
    lo, hi = sorted((p1, p2))
    mean = lambda p: np.arange(min(x, D) + 1) @ transmit_count_pmf(x, D, TransmissionModel(1, p, mode))
    assert mean(hi) >= mean(lo) - 1e-12


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 120), st.integers(0, 50), st.floats(0.01, 1.0))
def test_modes_agree_without_truncation(x, extra, p):
    D = x + extra
    np.testing.assert_allclose(transmit_count_pmf(x, D, TransmissionModel(1, p, LITERAL)),
                               transmit_count_pmf(x, D, TransmissionModel(1, p, ATTEMPTED)), atol=1e-12)


def test_mixed_pmf_weights():
    model = TransmissionModel(2, 1.0)
    channel = ChannelModel({None: 0.25, 0: 0.75})
    got = mixed_transmit_pmf(5, channel.capacities(model), model)
    np.testing.assert_allclose(got, [0.25, 0.0, 0.75])


def test_channel_rejects_bad_distribution():
    with pytest.raises(StructuralError):
        ChannelModel({0: 0.5, 1: 0.4})


def test_transmission_model_validation():
    with pytest.raises(StructuralError):
        TransmissionModel(0)
    with pytest.raises(StructuralError):
        TransmissionModel(3, 0.0)
    with pytest.raises(ValueError):
        TransmissionModel(3, 0.5, "sometimes")
