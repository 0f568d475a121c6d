import dataclasses

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rmode_sim.core import SignalBuffer, add_signals, check_aligned, sample_count, scale_signal
from rmode_sim.errors import AlignmentError, DomainError

FS = 1000.0

finite = st.floats(min_value=-1e100, max_value=1e100, allow_nan=False, allow_infinity=False)
moderate = st.one_of(st.just(0.0), st.floats(1e-6, 1e6), st.floats(-1e6, -1e-6))


def buf(values, fs=FS, start=0.0):
    return SignalBuffer(np.asarray(values, dtype=float), fs, start)


@pytest.mark.parametrize(
    "a, b, expected",
    [
        ([1, 2], [0, 0], [1, 2]),
        ([1, -1], [-1, 1], [0, 0]),
        ([0.5, 0.5], [0.25, 0.75], [0.75, 1.25]),
    ],
)
def test_add_signals_examples(a, b, expected):
    out = add_signals(buf(a), buf(b))
    assert out.samples.tolist() == expected
    assert out.sample_rate == FS
    assert out.start_time == 0.0


@pytest.mark.parametrize("k, expected", [(0, [0, 0]), (1, [3, -2]), (0.5, [1.5, -1])])
def test_scale_signal_examples(k, expected):
    assert scale_signal(buf([3, -2]), k).samples.tolist() == expected


@pytest.mark.parametrize("k", [float("inf"), float("-inf"), float("nan")])
def test_scale_rejects_non_finite(k):
    with pytest.raises(DomainError):
        scale_signal(buf([1.0]), k)


def test_alignment_error_names_first_mismatch():
    with pytest.raises(AlignmentError) as exc:
        add_signals(buf([1, 2]), buf([1, 2, 3], fs=2 * FS))
    assert exc.value.field == "sample_rate"
    with pytest.raises(AlignmentError) as exc:
        add_signals(buf([1, 2]), buf([1, 2], start=0.5))
    assert exc.value.field == "start_time"
    with pytest.raises(AlignmentError) as exc:
        check_aligned(buf([1, 2]), buf([1, 2, 3]))
    assert exc.value.field == "length"


def test_buffer_rejects_bad_values():
    with pytest.raises(DomainError):
        buf([1.0, float("nan")])
    with pytest.raises(DomainError):
        buf([1.0], fs=0.0)
    with pytest.raises(DomainError):
        buf([1.0], start=float("inf"))


def test_buffer_is_immutable_and_copies_input():
    source = np.array([1.0, 2.0])
    b = SignalBuffer(source, FS)
    source[0] = 99.0
    assert b.samples[0] == 1.0
    assert not b.samples.flags.writeable
    with pytest.raises(dataclasses.FrozenInstanceError):
        b.sample_rate = 5.0


def test_operations_do_not_mutate_inputs():
    a, b = buf([1.0, 2.0]), buf([3.0, 4.0])
    add_signals(a, b)
    scale_signal(a, 3.0)
    assert a.samples.tolist() == [1.0, 2.0]
    assert b.samples.tolist() == [3.0, 4.0]


def test_valid_region_and_flags():
    b = SignalBuffer(np.zeros(10), FS, unreliable_head=3, unreliable_tail=2)
    assert b.valid == slice(3, 8)
    other = SignalBuffer(np.zeros(10), FS, unreliable_head=1, unreliable_tail=4)
    total = add_signals(b, other)
    assert (total.unreliable_head, total.unreliable_tail) == (3, 4)
    assert SignalBuffer(np.zeros(4), FS, unreliable_head=10).valid == slice(4, 4)


def test_times_and_sample_count():
    b = SignalBuffer(np.zeros(4), 4.0, start_time=1.0)
    assert b.times().tolist() == [1.0, 1.25, 1.5, 1.75]
    assert b.duration == 1.0
    assert sample_count(1.0, 2_048_000.0) == 2_048_000
    assert sample_count(0.0, 2_048_000.0) == 0


@given(st.integers(min_value=0, max_value=64).flatmap(
    lambda n: st.tuples(arrays(np.float64, n, elements=finite), arrays(np.float64, n, elements=finite))
))
def test_add_signals_commutes_bit_exactly(pair):
    a, b = buf(pair[0]), buf(pair[1])
    assert np.array_equal(add_signals(a, b).samples, add_signals(b, a).samples)


@given(
    arrays(np.float64, st.integers(1, 64), elements=moderate),
    st.floats(1e-3, 1e3),
    st.floats(1e-3, 1e3),
)
def test_scale_composition_close_to_product(x, a, b):
    lhs = scale_signal(scale_signal(buf(x), a), b).samples
    rhs = scale_signal(buf(x), a * b).samples
    # two roundings on each side
    np.testing.assert_array_max_ulp(lhs, rhs, maxulp=4)
