"""Kernel backend selection: compiled extension if available, else pure Python."""

try:
    from . import _kernels as _impl
except ImportError:  # pragma: no cover - depends on the build environment
    from . import _kernels_py as _impl

BACKEND = _impl.BACKEND
EVENT_PIECE = 0.0
EVENT_ATOM = 1.0

propagate_events = _impl.propagate_events
rk8_piece = _impl.rk8_piece
