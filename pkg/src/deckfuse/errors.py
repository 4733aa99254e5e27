"""Exception types shared across the package.

Every error raised by deckfuse derives from DeckfuseError so callers can
catch the whole family at the CLI / gateway boundary.
"""


class DeckfuseError(Exception):
    """Base class for all deckfuse errors."""


# --- raster ---------------------------------------------------------------

class MalformedHeader(DeckfuseError):
    """PNM header is not a binary P5/P6 header with numeric dimensions."""


class TruncatedPayload(DeckfuseError):
    """PNM payload holds fewer sample bytes than the header promises."""


class UnsupportedMaxval(DeckfuseError):
    """PNM maxval is not 255."""


# --- geodesy / projection -------------------------------------------------

class OutOfRange(DeckfuseError):
    """Coordinates outside the supported local-tangent-plane window."""


class PreconditionViolation(DeckfuseError):
    """An operation was called outside its documented domain."""


class DimensionMismatch(DeckfuseError):
    """Raster dimensions disagree with the camera rig's (rows, cols)."""


class FootprintUnbounded(DeckfuseError):
    """Camera rig sees the horizon; its ground footprint is unbounded."""


# --- stitcher ---------------------------------------------------------------

class DegenerateInput(DeckfuseError):
    """Too few or coincident correspondences for a transform estimate."""


class EmptyInput(DeckfuseError):
    """An operation that needs at least one element received none."""


# --- catalog / gateway ------------------------------------------------------

class CorruptStore(DeckfuseError):
    """A store index file exists but cannot be parsed."""


class IoFailure(DeckfuseError):
    """Filesystem read/write failed while persisting or loading a store."""


class MissingFile(DeckfuseError):
    """A manifest references a file that does not exist."""


class DuplicateId(DeckfuseError):
    """A record id is already present in the store."""


class OutOfBounds(DeckfuseError):
    """Pixel or ground position outside a surface map's extent."""


class PortInUse(DeckfuseError):
    """The requested TCP port is already bound."""
