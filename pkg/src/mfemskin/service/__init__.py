from .app import SceneSession, create_app, pack_frame, unpack_frame
from .models import ErrorMessage, PoseMessage, SceneDescription

__all__ = [
    "SceneSession",
    "create_app",
    "pack_frame",
    "unpack_frame",
    "ErrorMessage",
    "PoseMessage",
    "SceneDescription",
]
