"""Self-describing array container.

A single file holds a JSON header (metadata + record table) followed by raw
little-endian array payloads. The same format backs phantom datasets,
exported saliency maps, and checkpoints, so round trips are bit-exact and
the file is trivially parseable from any language.

Layout::

    8 bytes   magic  b"GM3DC1\\x00\\x00"
    8 bytes   header length (uint64, little-endian)
    N bytes   UTF-8 JSON header: {"meta": {...}, "records": [...]}
    ...       concatenated payloads, offsets relative to payload start

Each record entry is ``{"name", "dtype", "shape", "offset", "nbytes"}``.
"""

import json

import numpy as np

MAGIC = b"GM3DC1\x00\x00"


class FormatError(Exception):
    """Raised when a container file is corrupt, truncated, or mislabeled."""


def save_arrays(path, arrays, meta=None):
    """Write named arrays plus a JSON-serializable meta dict to `path`.

    Arrays are stored little-endian in C order; dict iteration order is
    preserved so save -> load -> save is bit-stable.
    """
    records = []
    payloads = []
    offset = 0
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr)
        le = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        buf = le.tobytes()
        records.append(
            {
                "name": name,
                "dtype": arr.dtype.name,
                "shape": list(arr.shape),
                "offset": offset,
                "nbytes": len(buf),
            }
        )
        payloads.append(buf)
        offset += len(buf)
    header = json.dumps(
        {"meta": meta or {}, "records": records}, sort_keys=True
    ).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(len(header).to_bytes(8, "little"))
        f.write(header)
        for buf in payloads:
            f.write(buf)


def load_arrays(path):
    """Read a container file, returning ``(meta, {name: array})``.

    Any structural defect raises :class:`FormatError` naming the offending
    record; a truncated file never yields a silent partial result.
    """
    with open(path, "rb") as f:
        magic = f.read(len(MAGIC))
        if magic != MAGIC:
            raise FormatError(f"{path}: bad magic, not a container file")
        raw_len = f.read(8)
        if len(raw_len) != 8:
            raise FormatError(f"{path}: truncated header length field")
        header_len = int.from_bytes(raw_len, "little")
        raw_header = f.read(header_len)
        if len(raw_header) != header_len:
            raise FormatError(f"{path}: truncated JSON header")
        try:
            header = json.loads(raw_header.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise FormatError(f"{path}: unparseable header: {e}") from e
        payload = f.read()

    arrays = {}
    for rec in header.get("records", []):
        name = rec["name"]
        start, nbytes = rec["offset"], rec["nbytes"]
        chunk = payload[start : start + nbytes]
        if len(chunk) != nbytes:
            raise FormatError(f"{path}: truncated payload for record '{name}'")
        dtype = np.dtype(rec["dtype"]).newbyteorder("<")
        arr = np.frombuffer(chunk, dtype=dtype).reshape(rec["shape"])
        arrays[name] = arr.astype(np.dtype(rec["dtype"]), copy=True)
    return header.get("meta", {}), arrays
