"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`ViralRxError`
so the CLI can print a one-line ``error: <ClassName>: <message>`` and exit
non-zero.
"""


class ViralRxError(Exception):
    """Base class for all package errors."""


class FastaFormatError(ViralRxError, ValueError):
    pass


class InvalidResidueError(FastaFormatError):
    def __init__(self, accession, char, offset):
        self.accession = accession
        self.char = char
        self.offset = offset
        super().__init__(
            f"invalid residue {char!r} in {accession} at offset {offset}"
        )


class MetadataFormatError(ViralRxError, ValueError):
    pass


class DrugVirusFormatError(ViralRxError, ValueError):
    pass


class UnmappedSpeciesError(ViralRxError, KeyError):
    def __init__(self, raw_name):
        self.raw_name = raw_name
        super().__init__(raw_name)

    def __str__(self):
        return f"unmapped species {self.raw_name!r}"


class LabelError(ViralRxError, ValueError):
    pass


class SplitError(ViralRxError, ValueError):
    pass


class ShapeError(ViralRxError, ValueError):
    pass


class EncodingMismatchError(ShapeError):
    pass


class StaleTapeError(ViralRxError, RuntimeError):
    pass


class NonFiniteError(ViralRxError, FloatingPointError):
    pass


class DivergenceError(ViralRxError, RuntimeError):
    pass


class CheckpointError(ViralRxError, ValueError):
    pass


class ConfigError(ViralRxError, ValueError):
    pass


class MissingArtifactError(ViralRxError, FileNotFoundError):
    pass


class ConfigMismatchError(ViralRxError, RuntimeError):
    pass
