import pytest
from hypothesis import given

from diarkit.errors import MalformedLine
from diarkit.rttm_io import (Diarization, SpeakerTurn, Uem, format_time, parse_overlaps, parse_rttm, parse_uem,
                             write_overlaps, write_rttm, write_uem)
from diarkit.timeline import TimedSegment

from strategies import diarizations

LINE = "SPEAKER rec1 1 0.00 10.00 <NA> <NA> spkA <NA> <NA>"


def test_parse_single_line():
    d = parse_rttm(LINE)
    assert d.turns == [SpeakerTurn("rec1", 0.0, 10.0, "spkA")]


def test_parse_empty():
    assert len(parse_rttm(b"")) == 0


@pytest.mark.parametrize("line, where", [
    ("SPEAKER rec1 1 0.00 -1.0 <NA> <NA> spkA <NA> <NA>", 1),
    ("SPEAKER rec1 1 0.00 0 <NA> <NA> spkA <NA> <NA>", 1),
    ("SPEAKER rec1 1 x 1.0 <NA> <NA> spkA <NA> <NA>", 1),
    ("SPEAKER rec1 1 0.0 1.0 <NA> <NA> spkA", 1),
    ("LEXEME rec1 1 0.0 1.0 <NA> <NA> spkA <NA> <NA>", 1),
])
def test_parse_rejects(line, where):
    with pytest.raises(MalformedLine) as exc:
        parse_rttm(line)
    assert exc.value.line_no == where


def test_error_line_number_counts_comments():
    text = ";; header\n" + LINE + "\nSPEAKER rec1 1 1.0 nan <NA> <NA> spkA <NA> <NA>\n"
    with pytest.raises(MalformedLine) as exc:
        parse_rttm(text)
    assert exc.value.line_no == 3


def test_comments_and_crlf():
    d = parse_rttm(";; comment\r\n" + LINE + "\r\n\r\n")
    assert len(d) == 1


def test_write_template():
    out = write_rttm(Diarization([SpeakerTurn("rec1", 0.0, 10.0, "spkA")]))
    assert out == b"SPEAKER rec1 1 0.000 10.000 <NA> <NA> spkA <NA> <NA>\n"
    assert write_rttm(Diarization()) == b""


def test_rounding_half_away_from_zero():
    assert format_time(1.23456) == "1.235"
    assert format_time(0.0005) == "0.001"
    assert format_time(2.0015) == "2.002"
    line = write_rttm(Diarization([SpeakerTurn("r", 1.23456, 1.0, "a")])).decode()
    assert line.split()[3] == "1.235"


def test_output_sorted():
    d = Diarization([SpeakerTurn("r2", 0, 1, "a"), SpeakerTurn("r1", 5, 1, "b"), SpeakerTurn("r1", 5, 1, "a")])
    recs = [(ln.split()[1], ln.split()[3], ln.split()[7]) for ln in write_rttm(d).decode().splitlines()]
    assert recs == [("r1", "5.000", "a"), ("r1", "5.000", "b"), ("r2", "0.000", "a")]


def test_turn_invariants():
    with pytest.raises(ValueError):
        SpeakerTurn("r", 0.0, 1.0, "two words")
    with pytest.raises(ValueError):
        SpeakerTurn("r", -1.0, 1.0, "a")


@given(diarizations(recordings=("r1", "r2")))
def test_roundtrip_on_ms_grid(d):
    assert parse_rttm(write_rttm(d)) == d


@given(diarizations())
def test_write_is_deterministic(d):
    assert write_rttm(d) == write_rttm(Diarization(list(reversed(d.turns))))


def test_uem_parse_and_merge():
    assert parse_uem("rec1 1 0.0 60.0").regions == {"rec1": [TimedSegment(0, 60)]}
    assert parse_uem("rec1 1 0 10\nrec1 1 5 20\n").regions == {"rec1": [TimedSegment(0, 20)]}


def test_overlap_list_errors():
    with pytest.raises(MalformedLine) as exc:
        parse_overlaps("rec1 5.0 4.0")
    assert exc.value.line_no == 1
    with pytest.raises(MalformedLine):
        parse_overlaps("rec1 1 5.0 6.0")


def test_region_roundtrip():
    uem = Uem({"a": [TimedSegment(0, 1.5)], "b": [TimedSegment(2, 3), TimedSegment(4, 5)]})
    assert parse_uem(write_uem(uem)).regions == uem.regions
    ov = {"a": [TimedSegment(0.25, 1.0)]}
    assert parse_overlaps(write_overlaps(ov)) == ov
