"""relaygap - Forced-gap post-selection for quantum LDPC codes decoded with relay belief propagation."""

__version__ = "0.1.0"


def get_version() -> str:
    """Return the current version."""
    return __version__


__all__ = ["__version__", "get_version"]
