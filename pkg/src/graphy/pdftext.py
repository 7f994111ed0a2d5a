"""Minimal PDF text-layer extraction.

Handles uncompressed and Flate-compressed content streams and the common
text-showing operators (Tj, TJ, ', ").  No OCR, no font CMaps: bytes in
literal strings are decoded latin-1, which is faithful for the plain
ASCII text layers this project produces and consumes.
"""

from __future__ import annotations

import re
import zlib

from graphy.errors import CorruptDocument

_OBJ_RE = re.compile(rb"(\d+)\s+(\d+)\s+obj\b(.*?)endobj", re.S)
_STREAM_RE = re.compile(rb"stream\r?\n(.*?)\r?\nendstream", re.S)
_REF_RE = re.compile(rb"/Contents\s+(\d+)\s+\d+\s+R")
_REF_ARRAY_RE = re.compile(rb"/Contents\s*\[(.*?)\]", re.S)
_KIDS_RE = re.compile(rb"/Kids\s*\[(.*?)\]", re.S)
_NUM_REF_RE = re.compile(rb"(\d+)\s+\d+\s+R")


def _parse_objects(data: bytes) -> dict[int, bytes]:
    return {int(m.group(1)): m.group(3) for m in _OBJ_RE.finditer(data)}


def _stream_bytes(body: bytes) -> bytes | None:
    m = _STREAM_RE.search(body)
    if m is None:
        return None
    raw = m.group(1)
    if b"/FlateDecode" in body:
        try:
            return zlib.decompress(raw)
        except zlib.error as exc:
            raise CorruptDocument(f"bad Flate stream: {exc}") from exc
    return raw


def _literal_string(data: bytes, i: int) -> tuple[bytes, int]:
    """Parse a ``(...)`` string starting at index ``i``; returns (bytes, next)."""
    escapes = {0x6E: 10, 0x72: 13, 0x74: 9, 0x62: 8, 0x66: 12}
    depth, out = 1, bytearray()
    i += 1
    while i < len(data) and depth:
        c = data[i]
        if c == 0x5C:  # backslash
            i += 1
            if i >= len(data):
                break
            e = data[i]
            if e in (0x28, 0x29, 0x5C):
                out.append(e)
                i += 1
            elif e in escapes:
                out.append(escapes[e])
                i += 1
            elif 0x30 <= e <= 0x37:
                digits = bytearray()
                while i < len(data) and len(digits) < 3 and 0x30 <= data[i] <= 0x37:
                    digits.append(data[i])
                    i += 1
                out.append(int(digits, 8) & 0xFF)
            elif e in (0x0A, 0x0D):
                i += 1  # line continuation
            else:
                out.append(e)
                i += 1
        elif c == 0x28:
            depth += 1
            out.append(c)
            i += 1
        elif c == 0x29:
            depth -= 1
            if depth:
                out.append(c)
            i += 1
        else:
            out.append(c)
            i += 1
    return bytes(out), i


def _hex_string(data: bytes, i: int) -> tuple[bytes, int]:
    end = data.find(b">", i)
    if end < 0:
        end = len(data)
    digits = re.sub(rb"\s", b"", data[i + 1 : end])
    if len(digits) % 2:
        digits += b"0"
    return bytes.fromhex(digits.decode("ascii")), end + 1


def _content_text(stream: bytes) -> str:
    """Run the text operators of one content stream into plain text."""
    parts: list[str] = []
    pending: list[str] = []
    i = 0
    n = len(stream)

    def flush(newline_first: bool = False) -> None:
        if newline_first and parts and not parts[-1].endswith("\n"):
            parts.append("\n")
        parts.extend(pending)
        pending.clear()

    while i < n:
        c = stream[i]
        if c == 0x28:  # (
            s, i = _literal_string(stream, i)
            pending.append(s.decode("latin-1"))
        elif c == 0x3C and i + 1 < n and stream[i + 1] != 0x3C:  # < but not <<
            s, i = _hex_string(stream, i)
            pending.append(s.decode("latin-1"))
        elif c == 0x27:  # ' : next-line show
            flush(newline_first=True)
            i += 1
        elif c == 0x22:  # " : spacing + next-line show
            flush(newline_first=True)
            i += 1
        elif 0x41 <= c <= 0x5A or 0x61 <= c <= 0x7A or c == 0x2A:
            j = i
            while j < n and (0x41 <= stream[j] <= 0x5A or 0x61 <= stream[j] <= 0x7A or stream[j] == 0x2A):
                j += 1
            op = stream[i:j]
            if op == b"Tj":
                flush()
            elif op == b"TJ":
                flush()
            elif op in (b"Td", b"TD", b"T*"):
                if parts and not parts[-1].endswith("\n"):
                    parts.append("\n")
                pending.clear()
            elif op == b"ET":
                if parts and not parts[-1].endswith("\n"):
                    parts.append("\n")
                pending.clear()
            i = j
        else:
            i += 1
    flush()
    return "".join(parts)


def _page_order(objects: dict[int, bytes]) -> list[int]:
    """Page object numbers, via the /Pages tree when possible."""
    pages_nodes = {
        num for num, body in objects.items() if re.search(rb"/Type\s*/Pages\b", body)
    }
    page_nodes = {
        num
        for num, body in objects.items()
        if re.search(rb"/Type\s*/Page\b", body) and num not in pages_nodes
    }

    ordered: list[int] = []
    seen: set[int] = set()

    def walk(num: int) -> None:
        if num in seen:
            return
        seen.add(num)
        body = objects.get(num, b"")
        if num in page_nodes:
            ordered.append(num)
            return
        m = _KIDS_RE.search(body)
        if m:
            for ref in _NUM_REF_RE.finditer(m.group(1)):
                walk(int(ref.group(1)))

    for root in sorted(pages_nodes):
        walk(root)
    for num in sorted(page_nodes - set(ordered)):
        ordered.append(num)
    return ordered


def extract_pdf_text(data: bytes) -> tuple[str, int]:
    """Extract the text layer; returns (text with \\f page breaks, page count)."""
    if not data.startswith(b"%PDF"):
        raise CorruptDocument("missing %PDF header")
    objects = _parse_objects(data)
    pages = _page_order(objects)
    if not pages:
        raise CorruptDocument("no page objects found")

    page_texts = []
    for num in pages:
        body = objects[num]
        content_ids: list[int] = []
        m = _REF_ARRAY_RE.search(body)
        if m:
            content_ids = [int(r.group(1)) for r in _NUM_REF_RE.finditer(m.group(1))]
        else:
            m = _REF_RE.search(body)
            if m:
                content_ids = [int(m.group(1))]
        text = ""
        for cid in content_ids:
            stream = _stream_bytes(objects.get(cid, b""))
            if stream is not None:
                text += _content_text(stream)
        page_texts.append(text.rstrip("\n"))
    return "\f".join(page_texts), len(pages)
