"""File ingestion and persistence: emissions, vocabularies, manifests.

Emission matrices travel as NPY version 1.0 files pinned to little-endian
float32, C order, shape (T, V), holding natural-log probabilities. Each
``x.npy`` pairs with a vocabulary sidecar ``x.npy.vocab``: UTF-8 text, one
symbol per line in column order, with the blank column declared by the
literal line ``<ctc>`` and the end-of-sequence column by ``<eos>``. The
sidecar may open with a single comment line (``#`` followed by text)
documenting the log domain; a first line that is exactly ``#`` is a symbol.

Dataset manifests are JSON lines, one object per item, with fields ``id``,
``emissions_path``, and optional ``reference``. A reference beginning with
``@`` names a UTF-8 text file relative to the manifest's directory.
Relative emission paths resolve against the manifest's directory too.
"""

from __future__ import annotations

import ast
import json
import os
import struct
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import (
    BadMagic,
    DataError,
    DuplicateId,
    MalformedManifest,
    MalformedVocab,
    MissingField,
    ModeMismatch,
    ShapeMismatch,
    UnnormalizedRows,
    UnsupportedDtype,
)

MODE_CTC = "ctc"
MODE_S2S = "s2s"
BLANK_SYMBOL = "<ctc>"
EOS_SYMBOL = "<eos>"

_MAGIC = b"\x93NUMPY"
_SIDECAR_COMMENT = "# symbols in column order; matrix rows are natural-log probabilities"


@dataclass
class EmissionMatrix:
    """Per-frame log-probabilities from an optical model.

    ``frames`` is (T, V) in natural log; ``vocab`` lists the symbol of each
    column. CTC matrices declare a blank column, seq2seq matrices an EOS
    column; the two modes are mutually exclusive.
    """

    frames: np.ndarray
    vocab: tuple[str, ...]
    mode: str
    blank_index: int | None = None
    eos_index: int | None = None

    def validate(self) -> None:
        if self.frames.ndim != 2:
            raise ShapeMismatch(f"frames must be 2-D, got {self.frames.ndim}-D")
        if self.frames.shape[1] != len(self.vocab):
            raise ShapeMismatch(
                f"{self.frames.shape[1]} columns vs {len(self.vocab)} vocab entries"
            )
        if len(set(self.vocab)) != len(self.vocab):
            raise MalformedVocab("vocabulary entries must be distinct")
        if self.mode == MODE_CTC:
            if self.blank_index is None or self.eos_index is not None:
                raise ModeMismatch("ctc mode needs a blank index and no eos index")
            if not 0 <= self.blank_index < len(self.vocab):
                raise ShapeMismatch(f"blank index {self.blank_index} out of range")
            if self.vocab[self.blank_index] != BLANK_SYMBOL:
                raise MalformedVocab(
                    f"blank column must be labeled {BLANK_SYMBOL!r}"
                )
        elif self.mode == MODE_S2S:
            if self.eos_index is None or self.blank_index is not None:
                raise ModeMismatch("s2s mode needs an eos index and no blank index")
            if not 0 <= self.eos_index < len(self.vocab):
                raise ShapeMismatch(f"eos index {self.eos_index} out of range")
            if self.vocab[self.eos_index] != EOS_SYMBOL:
                raise MalformedVocab(f"eos column must be labeled {EOS_SYMBOL!r}")
        else:
            raise ModeMismatch(f"unknown emission mode {self.mode!r}")


def check_normalized(frames: np.ndarray, where: str = "emissions") -> None:
    """Require every row to log-sum-exp to 0 within 1e-4."""
    if frames.shape[0] == 0:
        return
    if np.isnan(frames).any():
        worst = int(np.isnan(frames).any(axis=1).argmax())
        raise UnnormalizedRows(f"{where}: row {worst} contains NaN", worst)
    m = frames.max(axis=1)
    lse = np.full(frames.shape[0], float("-inf"))
    ok = np.isfinite(m)
    if ok.any():
        sub = frames[ok] - m[ok][:, None]
        lse[ok] = m[ok] + np.log(np.exp(sub).sum(axis=1))
    err = np.abs(lse)
    worst = int(err.argmax())
    if not err[worst] <= 1e-4:
        raise UnnormalizedRows(
            f"{where}: row {worst} log-sum-exps to {lse[worst]:.6g}, not 0", worst
        )


def _write_npy(path: str, arr: np.ndarray) -> None:
    arr = np.ascontiguousarray(arr, dtype="<f4")
    header = "{'descr': '<f4', 'fortran_order': False, 'shape': %s, }" % (
        repr(tuple(int(d) for d in arr.shape)),
    )
    pad = (-(len(_MAGIC) + 4 + len(header) + 1)) % 64
    header = header + " " * pad + "\n"
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(b"\x01\x00")
        fh.write(struct.pack("<H", len(header)))
        fh.write(header.encode("latin1"))
        fh.write(arr.tobytes(order="C"))


def _read_npy(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        prelude = fh.read(8)
        if len(prelude) < 8 or prelude[:6] != _MAGIC:
            raise BadMagic(f"{path}: not an NPY file (bad magic bytes)")
        if prelude[6:8] != b"\x01\x00":
            raise BadMagic(
                f"{path}: NPY version {prelude[6]}.{prelude[7]} unsupported, need 1.0"
            )
        raw_len = fh.read(2)
        if len(raw_len) < 2:
            raise BadMagic(f"{path}: truncated NPY header")
        (hlen,) = struct.unpack("<H", raw_len)
        htext = fh.read(hlen).decode("latin1")
        if len(htext) < hlen:
            raise BadMagic(f"{path}: truncated NPY header")
        try:
            header = ast.literal_eval(htext)
        except (ValueError, SyntaxError):
            raise BadMagic(f"{path}: unparseable NPY header") from None
        if not isinstance(header, dict):
            raise BadMagic(f"{path}: NPY header is not a dict")
        descr = header.get("descr")
        if descr != "<f4":
            raise UnsupportedDtype(f"{path}: dtype {descr!r}, need little-endian '<f4'")
        if header.get("fortran_order") is not False:
            raise UnsupportedDtype(f"{path}: Fortran-order payloads are unsupported")
        shape = header.get("shape")
        if (
            not isinstance(shape, tuple)
            or len(shape) != 2
            or not all(isinstance(d, int) and d >= 0 for d in shape)
        ):
            raise ShapeMismatch(f"{path}: shape {shape!r} is not a (frames, vocab) pair")
        data = fh.read()
    expected = shape[0] * shape[1] * 4
    if len(data) != expected:
        raise ShapeMismatch(
            f"{path}: payload holds {len(data)} bytes, shape {shape} needs {expected}"
        )
    return np.frombuffer(data, dtype="<f4").reshape(shape).copy()


def _sidecar_path(path) -> str:
    return os.fspath(path) + ".vocab"


def write_vocab_sidecar(vocab: Iterable[str], path) -> None:
    """Write the column vocabulary next to an emissions file."""
    with open(_sidecar_path(path), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_SIDECAR_COMMENT + "\n")
        for sym in vocab:
            fh.write(sym + "\n")


def read_vocab_sidecar(path: str) -> tuple[str, ...]:
    """Read the column vocabulary paired with an emissions file."""
    sidecar = _sidecar_path(path)
    if not os.path.exists(sidecar):
        raise MalformedVocab(f"{sidecar}: vocabulary sidecar is missing")
    with open(sidecar, "r", encoding="utf-8", newline="\n") as fh:
        text = fh.read()
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if lines and lines[0].startswith("#") and len(lines[0]) > 1:
        lines = lines[1:]
    if not lines:
        raise MalformedVocab(f"{sidecar}: no vocabulary entries")
    for i, ln in enumerate(lines):
        if ln == "":
            raise MalformedVocab(f"{sidecar}: empty entry at line {i + 1}")
    if len(set(lines)) != len(lines):
        raise MalformedVocab(f"{sidecar}: duplicate vocabulary entries")
    return tuple(lines)


def write_emissions(matrix: EmissionMatrix, path: str) -> None:
    """Persist a matrix and its vocabulary sidecar.

    Round trip is bit-exact for float32 payloads and byte-exact for the
    sidecar's entry order.
    """
    matrix.validate()
    check_normalized(matrix.frames, path)
    _write_npy(path, matrix.frames)
    write_vocab_sidecar(matrix.vocab, path)


def read_emissions(path: str) -> EmissionMatrix:
    """Load a matrix, pair it with its sidecar, and validate both."""
    frames = _read_npy(path)
    vocab = read_vocab_sidecar(path)
    if len(vocab) != frames.shape[1]:
        raise ShapeMismatch(
            f"{path}: {frames.shape[1]} columns but {len(vocab)} vocabulary entries"
        )
    blank = vocab.index(BLANK_SYMBOL) if BLANK_SYMBOL in vocab else None
    eos = vocab.index(EOS_SYMBOL) if EOS_SYMBOL in vocab else None
    if blank is not None and eos is not None:
        raise MalformedVocab(f"{path}: vocabulary declares both blank and eos")
    if blank is None and eos is None:
        raise MalformedVocab(
            f"{path}: vocabulary declares neither {BLANK_SYMBOL!r} nor {EOS_SYMBOL!r}"
        )
    mode = MODE_CTC if blank is not None else MODE_S2S
    matrix = EmissionMatrix(
        frames=frames, vocab=vocab, mode=mode, blank_index=blank, eos_index=eos
    )
    matrix.validate()
    check_normalized(frames, path)
    return matrix


@dataclass(frozen=True)
class ManifestItem:
    id: str
    emissions_path: str
    reference: str | None = None


@dataclass(frozen=True)
class DatasetManifest:
    items: tuple[ManifestItem, ...]

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)


def load_manifest(path: str, require_references: bool = False) -> DatasetManifest:
    """Parse a JSON-lines manifest.

    Emission paths must exist once resolved; references may be inline or
    ``@file`` indirections, and are only mandatory when the caller says so.
    """
    base = os.path.dirname(os.path.abspath(path))
    items: list[ManifestItem] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedManifest(f"{path}:{lineno}: {exc}") from None
            if not isinstance(obj, dict):
                raise MalformedManifest(f"{path}:{lineno}: item is not an object")
            for fieldname in ("id", "emissions_path"):
                if fieldname not in obj:
                    raise MissingField(f"{path}:{lineno}: missing field {fieldname!r}")
            item_id = str(obj["id"])
            if item_id in seen:
                raise DuplicateId(f"{path}:{lineno}: duplicate id {item_id!r}")
            seen.add(item_id)
            emissions = os.path.join(base, str(obj["emissions_path"]))
            if not os.path.exists(emissions):
                raise DataError(
                    f"{path}:{lineno}: emissions file not found: {emissions}"
                )
            reference = obj.get("reference")
            if reference is not None:
                reference = str(reference)
                if reference.startswith("@"):
                    ref_path = os.path.join(base, reference[1:])
                    if not os.path.exists(ref_path):
                        raise DataError(
                            f"{path}:{lineno}: reference file not found: {ref_path}"
                        )
                    with open(ref_path, "r", encoding="utf-8") as rf:
                        reference = rf.read().rstrip("\n")
            elif require_references:
                raise MissingField(f"{path}:{lineno}: missing field 'reference'")
            items.append(
                ManifestItem(id=item_id, emissions_path=emissions, reference=reference)
            )
    return DatasetManifest(items=tuple(items))


def save_manifest(manifest: DatasetManifest, path: str) -> None:
    """Write a manifest as JSON lines with paths relative to its directory."""
    base = os.path.dirname(os.path.abspath(path))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for item in manifest.items:
            rel = os.path.relpath(item.emissions_path, base)
            obj: dict = {"id": item.id, "emissions_path": rel}
            if item.reference is not None:
                obj["reference"] = item.reference
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")
