"""
Serialization of wtapool artifacts.

Payoff tensors travel as ``PayoffTensorDocument`` in JSON, or as the same
document packed with MessagePack for large Monte Carlo tensors (about half
the size, and no float-to-text round trip). Tabular results go to CSV with
``#``-prefixed lines echoing the configuration that produced them.

Library indices are 0-based; every document written here uses the 1-based
option labels of the text, and reading converts back.
"""
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Sequence, TextIO, Union

import msgpack
import numpy as np
from pydantic import BaseModel, ValidationError

from wtapool import __version__
from wtapool.errors import DomainError
from wtapool.game import PayoffTensor
from wtapool.models import PayoffEntry, PayoffTensorDocument

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def tensor_to_document(tensor: PayoffTensor, config: Optional[dict] = None) -> PayoffTensorDocument:
    """Wire form of a tensor, with 1-based option labels."""
    entries = []
    for counts, payoffs, stderr in tensor.entries():
        entries.append(PayoffEntry(
            counts=list(counts),
            payoffs={str(j + 1): v for j, v in payoffs.items()},
            stderr=None if stderr is None else {str(j + 1): v for j, v in stderr.items()},
        ))
    return PayoffTensorDocument(n=tensor.n, m=tensor.m, entries=entries, config=config)


def document_to_tensor(document: PayoffTensorDocument) -> PayoffTensor:
    """Rebuild a PayoffTensor from its wire form."""
    m = document.m
    counts = np.array([entry.counts for entry in document.entries], dtype=int).reshape(-1, m)
    payoffs = np.full(counts.shape, np.nan)
    has_stderr = all(entry.stderr is not None for entry in document.entries)
    stderr = np.full(counts.shape, np.nan) if has_stderr else None

    for r, entry in enumerate(document.entries):
        present = {j + 1 for j in np.flatnonzero(counts[r])}
        labels = {int(label) for label in entry.payoffs}
        if labels != present:
            raise DomainError(f"entry {entry.counts} has payoffs for options {sorted(labels)}, expected {sorted(present)}")
        for label, value in entry.payoffs.items():
            payoffs[r, int(label) - 1] = value
        if stderr is not None:
            for label, value in entry.stderr.items():
                stderr[r, int(label) - 1] = value
    return PayoffTensor(document.n, m, counts, payoffs, stderr=stderr)


def to_json(obj: Union[BaseModel, Sequence[BaseModel], Dict[str, Any]]) -> str:
    """JSON text for a model, a list of models, or a plain dict that may contain models."""
    return json.dumps(_jsonable(obj), indent=2)


def _jsonable(obj):
    if isinstance(obj, BaseModel):
        return obj.model_dump(mode="json")
    if isinstance(obj, dict):
        return {key: _jsonable(value) for key, value in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(value) for value in obj]
    return obj


class MsgPackSerializer:
    """
    MessagePack codec for payoff tensor documents.

    The packed payload is the JSON document's dict plus a format tag, so a
    msgpack file and a JSON file of the same tensor decode to equal models.
    """

    FORMAT = "wtapool.payoff-tensor"

    def __init__(self):
        self.use_bin_type = True

    def pack_tensor(self, tensor: PayoffTensor, config: Optional[dict] = None) -> bytes:
        data = tensor_to_document(tensor, config).model_dump(mode="json")
        data["format"] = self.FORMAT
        data["version"] = __version__
        return msgpack.packb(data, use_bin_type=self.use_bin_type)

    def unpack_tensor(self, data: bytes) -> PayoffTensor:
        try:
            payload = msgpack.unpackb(data, raw=False)
        except (msgpack.ExtraData, msgpack.FormatError, ValueError) as e:
            raise DomainError(f"not a msgpack payoff tensor: {e}") from e
        if not isinstance(payload, dict) or payload.pop("format", None) != self.FORMAT:
            raise DomainError("msgpack payload is not a payoff tensor document")
        payload.pop("version", None)
        return document_to_tensor(_validate_document(payload))


# Global serializer instance
_serializer = None


def get_serializer() -> MsgPackSerializer:
    global _serializer
    if _serializer is None:
        _serializer = MsgPackSerializer()
    return _serializer


def _validate_document(payload: dict) -> PayoffTensorDocument:
    try:
        return PayoffTensorDocument.model_validate(payload)
    except ValidationError as e:
        raise DomainError(f"invalid payoff tensor document: {e}") from e


def save_tensor(tensor: PayoffTensor, path: PathLike, config: Optional[dict] = None):
    """Write a tensor as msgpack when the suffix is .msgpack, JSON otherwise."""
    path = Path(path)
    if path.suffix == ".msgpack":
        path.write_bytes(get_serializer().pack_tensor(tensor, config))
    else:
        path.write_text(to_json(tensor_to_document(tensor, config)), encoding="utf-8")
    logger.info(f"Saved payoff tensor (n={tensor.n}, m={tensor.m}) to {path}")


def load_tensor(path: PathLike) -> PayoffTensor:
    """Read a tensor written by ``save_tensor`` (format chosen by suffix)."""
    path = Path(path)
    if not path.exists():
        raise DomainError(f"tensor file not found: {path}")
    if path.suffix == ".msgpack":
        return get_serializer().unpack_tensor(path.read_bytes())
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DomainError(f"{path} is not valid JSON: {e}") from e
    return document_to_tensor(_validate_document(payload))


def write_csv(stream: TextIO, header: Dict[str, Any], columns: Sequence[str], rows: Iterable[Sequence[Any]]):
    """
    CSV table preceded by one ``# key: value`` line per configuration entry.

    Header values are written as compact JSON so lists and nulls stay readable.
    """
    for key, value in header.items():
        stream.write(f"# {key}: {json.dumps(_jsonable(value), separators=(',', ':'))}\n")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows(rows)


def open_output(path: Optional[PathLike]) -> TextIO:
    """Text stream for a CLI ``--out`` argument (stdout when None or '-')."""
    if path is None or str(path) == "-":
        return sys.stdout
    return open(path, "w", encoding="utf-8", newline="")


def read_csv_table(stream: TextIO):
    """Inverse of ``write_csv``: (header dict, column names, rows of strings)."""
    header = {}
    lines = []
    for line in stream:
        if line.startswith("# "):
            key, _, value = line[2:].rstrip("\n").partition(": ")
            header[key] = json.loads(value)
        else:
            lines.append(line)
    reader = csv.reader(lines)
    columns = next(reader, [])
    return header, columns, [row for row in reader]
