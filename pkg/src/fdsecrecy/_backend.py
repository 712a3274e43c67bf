"""Import-time choice between the compiled kernels and the numpy fallback.

Set ``FDSECRECY_BACKEND=python`` to force the fallback, or ``compiled`` to
fail loudly when the extension is missing.
"""

import os

from . import _kernels_py

_choice = os.environ.get("FDSECRECY_BACKEND", "auto").strip().lower()

if _choice == "python":
    kernels = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels
        BACKEND = "compiled"
    except ImportError:
        if _choice == "compiled":
            raise
        kernels = _kernels_py
        BACKEND = "python"


def available_backends():
    """Names of kernel modules importable in this environment."""
    names = ["python"]
    try:
        from . import _kernels  # noqa: F401
    except ImportError:
        pass
    else:
        names.insert(0, "compiled")
    return names


def get_kernels(name=None):
    """Kernel module by name (``None`` returns the active one)."""
    if name is None:
        return kernels
    if name == "python":
        return _kernels_py
    if name == "compiled":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown backend {name!r}")
