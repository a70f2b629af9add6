import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from errors import InvariantError
from sc_codec import (
    NEGATIVE,
    POSITIVE,
    Bitstream,
    CodecConfig,
    CodecError,
    Pairing,
    SignedMagnitude,
    StochasticNumber,
    coverage_check,
    decode,
    encode,
    format_stream,
    iter_operand_pairs,
    parse_stream,
    sc_multiply,
    sc_scaled_add,
)


def act(signed, levels=11):
    return SignedMagnitude.from_signed(signed, levels)


def wgt(signed, levels=4):
    return SignedMagnitude.from_signed(signed, levels)


def test_every_operand_pair_multiplies_exactly(codec):
    pairs = list(iter_operand_pairs(codec))
    assert len(pairs) == 240
    for a, w in pairs:
        product = sc_multiply(encode(a, codec), encode(w, codec))
        assert product.stream.length == 44
        assert product.ones == a.magnitude * w.magnitude
        if a.magnitude and w.magnitude:
            assert product.sign == a.sign * w.sign


def test_encoding_is_left_aligned_unary(codec):
    six = encode(act(6), codec)
    assert str(six.stream) == "11111100000" * 4
    half = encode(wgt(2), codec)
    assert str(half.stream) == "1100" * 11


def test_product_of_opposite_signs_is_negative(codec):
    product = sc_multiply(encode(act(6), codec), encode(wgt(-2), codec))
    assert product.ones == 12
    assert product.sign == NEGATIVE
    assert product.stream.value == pytest.approx(12 / 44)


def test_zero_is_canonically_positive(codec):
    assert encode(SignedMagnitude(NEGATIVE, 0, 11), codec).sign == POSITIVE


def test_round_trip_both_level_sets(codec):
    for levels in (11, 4):
        for signed in range(-levels, levels + 1):
            value = SignedMagnitude.from_signed(signed, levels)
            assert decode(encode(value, codec)) == value


def test_magnitude_out_of_range_rejected():
    with pytest.raises(CodecError):
        SignedMagnitude(POSITIVE, 12, 11)
    with pytest.raises(CodecError):
        SignedMagnitude(0, 1, 11)


def test_encode_rejects_foreign_levels(codec):
    with pytest.raises(CodecError, match="levels 7"):
        encode(SignedMagnitude(POSITIVE, 3, 7), codec)


def test_coverage_for_coprime_lengths():
    small = CodecConfig(activation_levels=4, weight_levels=3)
    assert small.extended_length == 12
    full_a = encode(SignedMagnitude(POSITIVE, 4, 4), small)
    full_w = encode(SignedMagnitude(POSITIVE, 3, 3), small)
    assert coverage_check(full_a, full_w)

    codec = CodecConfig()
    assert coverage_check(encode(act(11), codec), encode(wgt(4), codec))


def test_equal_lengths_do_not_cover():
    a = parse_stream("+1100", 4)
    b = parse_stream("+1000", 4)
    assert not coverage_check(a, b)
    with pytest.raises(CodecError, match="do not pair"):
        sc_multiply(a, b)


def test_length_mismatch_rejected(codec):
    with pytest.raises(CodecError, match="length mismatch"):
        sc_multiply(encode(act(3), codec), parse_stream("+1000", 4))


@pytest.mark.parametrize(
    "kwargs, field",
    [
        ({"activation_levels": 6, "weight_levels": 4}, "weight_levels"),
        ({"activation_levels": 4, "weight_levels": 4}, "weight_levels"),
        ({"activation_levels": 0}, "activation_levels"),
        ({"extended_length": 40}, "extended_length"),
    ],
)
def test_codec_config_invariants(kwargs, field):
    with pytest.raises(InvariantError) as info:
        CodecConfig(**kwargs)
    assert info.value.field == field


def test_clock_division_holds_weight_bits():
    codec = CodecConfig(pairing=Pairing.CLOCK_DIVISION)
    half = encode(wgt(2), codec)
    assert half.hold == 11
    assert str(half.stream) == "1" * 22 + "0" * 22
    for a, w in iter_operand_pairs(codec):
        product = sc_multiply(encode(a, codec), encode(w, codec))
        assert product.ones == a.magnitude * w.magnitude


def test_pairing_parses_from_text():
    assert CodecConfig(pairing="clock_division").pairing is Pairing.CLOCK_DIVISION


def test_scaled_add_halves_the_sum(codec):
    total = sc_scaled_add(encode(act(6), codec), encode(act(2), codec), codec)
    assert total.ones == 16
    assert total.stream.value == pytest.approx(4 / 11)


def test_scaled_add_rejects_mixed_signs(codec):
    with pytest.raises(CodecError, match="mixed-sign"):
        sc_scaled_add(encode(act(3), codec), encode(act(-2), codec), codec)


def test_scaled_add_needs_activation_operands(codec):
    with pytest.raises(CodecError):
        sc_scaled_add(encode(act(3), codec), encode(wgt(1), codec), codec)


def test_format_and_parse_stream(codec):
    text = format_stream(encode(wgt(-3), codec))
    assert text == "-" + "1110" * 11
    parsed = parse_stream("−" + "1110" * 11, 4)
    assert decode(parsed) == wgt(-3)


@pytest.mark.parametrize("text", ["1100", "+", "+1120", "*1100"])
def test_parse_stream_rejects_malformed(text):
    with pytest.raises(CodecError):
        parse_stream(text, 4)


def test_decode_detects_corrupted_stream(codec):
    bits = encode(act(6), codec).stream.bits.copy()
    bits[12] ^= 1
    corrupted = StochasticNumber(POSITIVE, Bitstream(bits), 11)
    with pytest.raises(CodecError, match="corrupted"):
        decode(corrupted)


def test_decode_rejects_fraction_off_the_grid():
    with pytest.raises(CodecError, match="multiple of 1/2"):
        decode(parse_stream("+1000", 2, hold=2))


def test_bitstream_rejects_non_binary():
    with pytest.raises(CodecError):
        Bitstream([0, 1, 2])
    with pytest.raises(CodecError):
        Bitstream([])


def test_streams_are_read_only(codec):
    stream = encode(act(5), codec).stream
    with pytest.raises(ValueError):
        stream.bits[0] = 0


@pytest.mark.property_based
@given(
    a=st.integers(-11, 11),
    w=st.integers(-4, 4),
    pairing=st.sampled_from(list(Pairing)),
)
@settings(max_examples=200)
def test_product_value_is_exact(a, w, pairing):
    codec = CodecConfig(pairing=pairing)
    product = sc_multiply(encode(act(a), codec), encode(wgt(w), codec))
    assert product.ones == abs(a) * abs(w)
    assert product.sign * product.stream.value == pytest.approx(act(a).value * wgt(w).value)


@pytest.mark.property_based
@given(a=st.integers(0, 11), b=st.integers(0, 11))
@settings(max_examples=100)
def test_scaled_add_value(a, b):
    codec = CodecConfig()
    total = sc_scaled_add(encode(act(a), codec), encode(act(b), codec), codec)
    assert total.ones * 11 == (a + b) * 22


def test_decode_of_a_non_unary_stream_counts_ones():
    value = decode(parse_stream("+01101010", 8))
    assert value == SignedMagnitude(POSITIVE, 4, 8)
    assert value.value == 0.5


def test_weight_stream_repeats_to_the_extended_length():
    codec = CodecConfig(activation_levels=3, weight_levels=4)
    assert codec.extended_length == 12
    assert str(encode(wgt(2), codec).stream) == "1100" * 3


@pytest.mark.parametrize("value", [1.9, 2.0, True, "3", None])
def test_from_signed_rejects_non_integers(value):
    with pytest.raises(CodecError, match="must be an integer"):
        SignedMagnitude.from_signed(value, 11)


def test_from_signed_accepts_numpy_integers():
    assert SignedMagnitude.from_signed(np.int64(-7), 11) == SignedMagnitude(NEGATIVE, 7, 11)


def test_stochastic_numbers_are_hashable(codec):
    a, b = encode(act(6), codec), encode(act(6), codec)
    assert a == b
    assert hash(a) == hash(b)
    assert len({a, b, encode(act(5), codec)}) == 2
