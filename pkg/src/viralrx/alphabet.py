"""The 28-symbol amino-acid alphabet.

Token id 0 is reserved for padding; symbols map to ids 1..28 in the order of
:data:`SYMBOLS`.
"""

import numpy as np

from .errors import InvalidResidueError

STANDARD = "ACDEFGHIKLMNPQRSTVWY"
EXTENDED = "BJOUXZ"
SYMBOLS = STANDARD + EXTENDED + "*-"
N_SYMBOLS = len(SYMBOLS)
PAD_ID = 0

assert N_SYMBOLS == 28

CHAR_TO_ID = {c: i + 1 for i, c in enumerate(SYMBOLS)}
ID_TO_CHAR = {i: c for c, i in CHAR_TO_ID.items()}

# byte -> id lookup; 255 marks characters outside the alphabet
_LUT = np.full(256, 255, dtype=np.uint8)
for _c, _i in CHAR_TO_ID.items():
    _LUT[ord(_c)] = _i
    _LUT[ord(_c.lower())] = _i


def first_invalid(residues):
    """Return ``(offset, char)`` of the first character outside the alphabet, or None."""
    # one byte per character, non-latin-1 characters become '?'
    raw = np.frombuffer(residues.encode("latin-1", "replace"), dtype=np.uint8)
    bad = np.flatnonzero(_LUT[raw] == 255)
    if bad.size == 0:
        return None
    off = int(bad[0])
    return off, residues[off]


def validate(residues, accession="<sequence>"):
    """Raise :class:`InvalidResidueError` if ``residues`` has a foreign character."""
    bad = first_invalid(residues)
    if bad is not None:
        raise InvalidResidueError(accession, bad[1], bad[0])


def to_ids(residues):
    """Map a residue string to a uint8 id array (no padding, no validation)."""
    raw = np.frombuffer(residues.encode("ascii"), dtype=np.uint8)
    return _LUT[raw]
