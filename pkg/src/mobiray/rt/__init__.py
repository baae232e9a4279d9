"""Ray-tracing core: acceleration index, Fresnel model, and the tracer."""

from .bvh import AccelIndex, intersect, intersect_brute
from .fresnel import TE, TM, complex_permittivity, fresnel_reflection
from .reflectors import Reflector, ReflectorSet, build_reflectors
from .tracer import (
    ChannelResult,
    PropagationPath,
    RTConfig,
    SceneIndex,
    build_index,
    image_method_paths,
    los_path,
    path_gain,
    trace_channel,
)

__all__ = [
    "AccelIndex",
    "ChannelResult",
    "PropagationPath",
    "RTConfig",
    "Reflector",
    "ReflectorSet",
    "SceneIndex",
    "TE",
    "TM",
    "build_index",
    "build_reflectors",
    "complex_permittivity",
    "fresnel_reflection",
    "image_method_paths",
    "intersect",
    "intersect_brute",
    "los_path",
    "path_gain",
    "trace_channel",
]
