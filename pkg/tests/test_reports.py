import pytest

from tsn5g.core import ObservationPoint as P
from tsn5g.reports import (CAPTURE_HEADER, CaptureFormatError, capture_csv, format_millis,
                           parse_capture)
from tsn5g.sim import CaptureRecord, CaptureSet


def sample_set():
    caps = CaptureSet()
    caps.records[P.GATEWAY_INGRESS] += [CaptureRecord(0, None, 5, 100),
                                        CaptureRecord(1, "S1", 7, 1250)]
    caps.records[P.GATEWAY_EGRESS].append(CaptureRecord(1, "S1", 9, 1250))
    caps.records[P.CORE_ARRIVAL].append(CaptureRecord(1, "S1", 5_680_009, 1250))
    return caps


def test_capture_csv_layout():
    text = capture_csv(sample_set())
    lines = text.split("\n")
    assert lines[0] == ",".join(CAPTURE_HEADER)
    assert lines[1] == "gateway_ingress,0,,5,100"
    assert lines[-2] == "core_arrival,1,S1,5680009,1250"
    assert "\r" not in text and text.endswith("\n")


def test_capture_roundtrip():
    caps = sample_set()
    again = parse_capture(capture_csv(caps))
    assert again.records == caps.records


def test_capture_rejects_garbage():
    with pytest.raises(CaptureFormatError):
        parse_capture("a,b,c\n")
    with pytest.raises(CaptureFormatError) as e:
        parse_capture(",".join(CAPTURE_HEADER) + "\nnowhere,1,S1,5,100\n", "x.csv")
    assert "x.csv:2" in str(e.value)


@pytest.mark.parametrize("ns, text", [(141_900_000, "141.9ms"), (-3_100_000, "-3.1ms"),
                                      (4_400_000, "4.4ms"), (200_000_000, "200ms"), (1, "0.000001ms")])
def test_format_millis(ns, text):
    assert format_millis(ns) == text
