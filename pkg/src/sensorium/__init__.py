"""Deterministic multimodal embodied-agent environment engine.

A headless simulator for training embodied agents: a humanoid avatar with
binocular vision, binaural audio, spring-skin touch and proprioception,
driven on a fixed integer-step clock, with a task suite, a binary TCP
protocol for remote learners, and supervised-dataset generators.
"""
from ._kernels import backend_name
from .clock import SimClock, derive_stream
from .env import Environment, ObservationFrame
from .errors import EngineError

__version__ = "0.1.0"

__all__ = ["Environment", "ObservationFrame", "SimClock", "derive_stream",
           "EngineError", "backend_name", "__version__"]
