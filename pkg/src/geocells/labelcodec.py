"""Digit-string labels for cells.

A label is one face digit ('0'-'5') followed by one child digit
('0'-'3') per level, with no separators: "431" is child 1 of child 3 of
face 4.  String prefixes coincide exactly with cell ancestry, and the
single-character digits double as the decoder's token alphabet.
"""

from __future__ import annotations

from .cellgeo import MAX_LEVEL, CellId

FACE_DIGITS = "012345"
CHILD_DIGITS = "0123"


class InvalidLabel(ValueError):
    """Label validation failure; `reason` is a stable machine-readable code."""

    def __init__(self, reason: str, message: str):
        super().__init__(message)
        self.reason = reason


def encode(c: CellId) -> str:
    """Cell -> digit string (face digit, then path digits root-to-leaf)."""
    return str(c.face) + "".join(str(d) for d in c.path)


def decode(s: str, max_level: int = MAX_LEVEL) -> CellId:
    """Digit string -> cell; raises InvalidLabel with a distinct reason per defect."""
    if not isinstance(s, str) or s == "":
        raise InvalidLabel("empty", "label must be a non-empty digit string")
    if len(s) > 1 + max_level:
        raise InvalidLabel(
            "too-long", f"label {s!r} has {len(s)} digits; limit is {1 + max_level}"
        )
    for pos, ch in enumerate(s):
        if not ch.isascii() or not ch.isdigit():
            raise InvalidLabel("non-digit", f"label {s!r} has non-digit {ch!r} at position {pos}")
    if s[0] not in FACE_DIGITS:
        raise InvalidLabel("face-digit", f"face digit {s[0]!r} out of range 0-5 in {s!r}")
    for pos, ch in enumerate(s[1:], start=1):
        if ch not in CHILD_DIGITS:
            raise InvalidLabel(
                "child-digit", f"child digit {ch!r} out of range 0-3 at position {pos} in {s!r}"
            )
    return CellId(int(s[0]), tuple(int(ch) for ch in s[1:]))


def is_valid(s: str, max_level: int = MAX_LEVEL) -> bool:
    try:
        decode(s, max_level)
        return True
    except InvalidLabel:
        return False


def ancestors(s: str) -> list[str]:
    """Proper prefixes of a valid label, shortest first ("431" -> ["4", "43"])."""
    decode(s)
    return [s[:k] for k in range(1, len(s))]
