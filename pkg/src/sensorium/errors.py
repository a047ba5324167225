"""Exception types raised by the engine."""


class EngineError(Exception):
    """Base class for all engine errors."""


class InvalidActionError(EngineError):
    """Action vector malformed: wrong length, out-of-range component, bad kind."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class ModeConflictError(EngineError):
    """Animation-primitive call on a joint-torque agent or vice versa."""


class InteractionRefusedError(EngineError):
    """kick/grab refused: target not interactable (or too heavy for grab)."""


class NotFoundError(EngineError):
    """Unknown object, bone, or playground name."""


class EpisodeFinishedError(EngineError):
    """step() called on a done episode before reset()."""


class SimulationDivergedError(EngineError):
    """NaN/Inf appeared in a body's state; names the offending body."""

    def __init__(self, body_id):
        super().__init__(f"simulation diverged: non-finite state on body {body_id!r}")
        self.body_id = body_id


class UnsupportedShapePairError(EngineError):
    """Contact test requested for a shape pair with no narrow-phase routine."""


class InvalidGeometryError(EngineError):
    """Acoustic source or microphone placed outside the room."""


class ProtocolError(EngineError):
    """Malformed wire frame or protocol violation."""


class ConfigurationError(EngineError):
    """Inconsistent sensor/engine configuration."""
