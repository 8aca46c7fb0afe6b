"""
Tests for tensor documents and CSV tables (serialization.py).
"""
import io
import json

import msgpack
import numpy as np
import pytest

from wtapool.errors import DomainError
from wtapool.game import mc_payoff_tensor
from wtapool.serialization import (
    MsgPackSerializer,
    document_to_tensor,
    get_serializer,
    load_tensor,
    read_csv_table,
    save_tensor,
    tensor_to_document,
    to_json,
    write_csv,
)


@pytest.fixture(scope="module")
def mc_tensor():
    return mc_payoff_tensor(3, [1.0, 0.5], samples=20_000, seed=5)


def assert_same_tensor(a, b):
    assert (a.n, a.m) == (b.n, b.m)
    np.testing.assert_array_equal(a.counts, b.counts)
    np.testing.assert_array_equal(a.payoffs, b.payoffs)
    if a.stderr is None:
        assert b.stderr is None
    else:
        np.testing.assert_array_equal(a.stderr, b.stderr)


class TestTensorDocument:
    """Test the wire form of payoff tensors."""

    def test_one_based_labels(self, intro_tensor):
        """Test documents label options from 1."""
        document = tensor_to_document(intro_tensor)
        entry = next(e for e in document.entries if e.counts == [2, 1])
        assert entry.payoffs["2"] == pytest.approx(0.2)
        assert entry.payoffs["1"] == pytest.approx(-0.1)
        assert entry.stderr is None

    def test_document_round_trip(self, intro_tensor):
        """Test converting to a document and back keeps every entry."""
        assert_same_tensor(document_to_tensor(tensor_to_document(intro_tensor)), intro_tensor)

    def test_label_mismatch(self, intro_tensor):
        """Test a payoff for an option nobody picked is rejected."""
        document = tensor_to_document(intro_tensor)
        entry = next(e for e in document.entries if e.counts == [3, 0])
        entry.payoffs["2"] = 0.0
        with pytest.raises(DomainError):
            document_to_tensor(document)

    def test_to_json(self, intro_tensor):
        """Test JSON output of a document with its configuration."""
        data = json.loads(to_json({"config": {"n": 3}, "tensor": tensor_to_document(intro_tensor)}))
        assert data["config"] == {"n": 3}
        assert data["tensor"]["m"] == 2
        assert len(data["tensor"]["entries"]) == 4


class TestMsgPackSerializer:
    """Test the MessagePack codec."""

    def test_serializer_singleton(self):
        """Test the global serializer is reused."""
        assert get_serializer() is get_serializer()

    def test_round_trip_with_stderr(self, mc_tensor):
        """Test Monte Carlo tensors keep payoffs and standard errors bit-for-bit."""
        serializer = MsgPackSerializer()
        assert_same_tensor(serializer.unpack_tensor(serializer.pack_tensor(mc_tensor)), mc_tensor)

    def test_format_tag(self, intro_tensor):
        """Test the payload carries the format tag and configuration."""
        payload = msgpack.unpackb(get_serializer().pack_tensor(intro_tensor, {"seed": 1}), raw=False)
        assert payload["format"] == MsgPackSerializer.FORMAT
        assert payload["config"] == {"seed": 1}

    def test_rejects_other_payloads(self):
        """Test foreign msgpack data and garbage bytes raise DomainError."""
        serializer = MsgPackSerializer()
        with pytest.raises(DomainError):
            serializer.unpack_tensor(msgpack.packb({"n": 3}))
        with pytest.raises(DomainError):
            serializer.unpack_tensor(b"\xc1")


class TestTensorFiles:
    """Test saving and loading tensor files."""

    @pytest.mark.parametrize("name", ["tensor.json", "tensor.msgpack"])
    def test_file_round_trip(self, tmp_path, mc_tensor, name):
        """Test both file formats restore the tensor."""
        path = tmp_path / name
        save_tensor(mc_tensor, path, {"samples": 20_000})
        assert_same_tensor(load_tensor(path), mc_tensor)

    def test_missing_file(self, tmp_path):
        """Test a missing file raises DomainError."""
        with pytest.raises(DomainError):
            load_tensor(tmp_path / "absent.json")

    def test_invalid_json(self, tmp_path):
        """Test malformed and schema-violating JSON raise DomainError."""
        broken = tmp_path / "broken.json"
        broken.write_text("{not json")
        with pytest.raises(DomainError):
            load_tensor(broken)
        wrong = tmp_path / "wrong.json"
        wrong.write_text(json.dumps({"n": 1, "m": 2, "entries": []}))
        with pytest.raises(DomainError):
            load_tensor(wrong)


class TestCsvTables:
    """Test CSV output with configuration headers."""

    def test_header_and_rows(self):
        """Test header lines precede the table and read back."""
        stream = io.StringIO()
        write_csv(stream, {"n_range": [3, 4], "seed": 0, "k": None},
                  ["n", "m", "avg_prob"], [(3, 2, 0.5), (4, 2, 0.25)])
        text = stream.getvalue()
        assert text.startswith("# n_range: [3,4]\n")
        assert "n,m,avg_prob\n3,2,0.5\n" in text

        header, columns, rows = read_csv_table(io.StringIO(text))
        assert header == {"n_range": [3, 4], "seed": 0, "k": None}
        assert columns == ["n", "m", "avg_prob"]
        assert rows == [["3", "2", "0.5"], ["4", "2", "0.25"]]
