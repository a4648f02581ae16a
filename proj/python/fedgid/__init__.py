"""Python bindings for the fedgid core library."""

try:
    from . import _core
except ImportError:  # editable/dev layout where the module sits next to the package
    import _core  # type: ignore

from ._core import *  # noqa: F401,F403

__all__ = [name for name in dir(_core) if not name.startswith("_")]
