import pytest
from hypothesis import given, strategies as st

from lzspa.core import AlphabetError
from lzspa.tokens import TokenFileError, format_tokens, parse_tokens, read_labels_file


@given(st.integers(2, 300).flatmap(
    lambda A: st.tuples(st.just(A), st.lists(st.lists(st.integers(0, A - 1), min_size=1, max_size=20), min_size=1, max_size=4))))
def test_int_format_round_trip(case):
    A, seqs = case
    data = format_tokens(seqs, A)
    corpus = parse_tokens(data)
    assert corpus.sequences == seqs and corpus.alphabet_size == A and corpus.fmt == "ints"
    assert format_tokens(corpus.sequences, A) == data


def test_bytes_format():
    corpus = parse_tokens(b"\x00\xffab")
    assert corpus.fmt == "bytes" and corpus.alphabet_size == 256 and corpus.sequences == [[0, 255, 97, 98]]
    assert format_tokens(corpus.sequences, 256, "bytes") == b"\x00\xffab"


def test_empty_int_file_holds_one_empty_sequence():
    assert parse_tokens(b"#lzspa-tokens A=4\n").sequences == [[]]


def test_parse_errors():
    with pytest.raises(TokenFileError):
        parse_tokens(b"1\n2\n", "ints")
    with pytest.raises(TokenFileError):
        parse_tokens(b"#lzspa-tokens A=3\n1\nx\n")
    with pytest.raises(AlphabetError):
        parse_tokens(b"#lzspa-tokens A=3\n1\n3\n")
    with pytest.raises(TokenFileError):
        format_tokens([[1], [2]], 4, "bytes")


def test_labels_file(tmp_path):
    (tmp_path / "sub").mkdir()
    lab = tmp_path / "sub" / "labels.txt"
    lab.write_text("# comment\na.txt\tclass one\nb.txt two\n\n")
    entries = read_labels_file(lab)
    assert entries == [(tmp_path / "sub" / "a.txt", "class one"), (tmp_path / "sub" / "b.txt", "two")]
    (tmp_path / "empty.txt").write_text("\n")
    with pytest.raises(TokenFileError):
        read_labels_file(tmp_path / "empty.txt")
