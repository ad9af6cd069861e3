"""Exception taxonomy shared by all vidial modules.

Two broad classes matter for the CLI exit-code contract: usage/validation
problems (bad arguments, malformed configs, invalid generator specs) map to
exit code 1, everything else that goes wrong with data or at runtime maps
to exit code 2.
"""


class VidialError(Exception):
    """Base class for all vidial-specific errors."""


class ConfigError(VidialError):
    """Invalid configuration: unknown key, bad value, inconsistent flags."""


# --- corpus / file formats -------------------------------------------------

class BadMagic(VidialError):
    """File does not start with the expected magic bytes."""


class ZeroDim(VidialError):
    """Feature file declares a zero feature dimension."""


class Truncated(VidialError):
    """Declared payload size exceeds the bytes actually present."""


class NonFinite(VidialError):
    """Feature payload contains NaN or infinity."""


class EmptyObjectSet(VidialError):
    """An image declares zero object vectors (every image needs >= 1)."""


class IndexOutOfRange(VidialError):
    """A turn references a feature index outside its store."""


class EpisodeTooShort(VidialError):
    """An episode has fewer than two turns."""


class MalformedRecord(VidialError):
    """A line of a JSONL data file cannot be parsed into the expected shape."""


class SpecInvalid(VidialError):
    """A synthetic-corpus spec violates its invariants (usage-class error)."""


# --- model / training ------------------------------------------------------

class ContextEmpty(VidialError):
    """Every context turn was truncated away; nothing left to encode."""


class DimMismatch(VidialError):
    """Visual feature dimension disagrees with the model config."""


class EmptyTarget(VidialError):
    """The decoding target has no tokens."""


class EmptyUtterance(VidialError):
    """An utterance passed to a scoring function has no tokens."""


class EmptyDataset(VidialError):
    """Training requested on a dataset with no usable examples."""


class TrainingDiverged(VidialError):
    """Loss became NaN/inf during training (fail fast, never checkpoint)."""


class VersionMismatch(VidialError):
    """Checkpoint format version or component/mode tag does not match."""


class CorruptCheckpoint(VidialError):
    """Checkpoint file is truncated or structurally invalid."""


# --- MI / decode / eval ----------------------------------------------------

class NoNegativesAvailable(VidialError):
    """Negative sampling found no candidate index != the positive one."""


class EmptyNBest(VidialError):
    """Reranking requested over an empty hypothesis list."""


class ModeMismatch(VidialError):
    """Visual input kind (coarse vector vs object set) disagrees with the
    component it is fed to, or a checkpoint mode disagrees with the request."""


class SplitOverlap(VidialError):
    """Adversarial train and test splits share episodes."""


class Unbalanced(VidialError):
    """A split is too small to hold both positive and negative examples."""


class LengthMismatch(VidialError):
    """Candidate and reference lists differ in length."""
