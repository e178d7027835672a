"""S-spectra of quaternionic matrices and shift operators.

Modules: :mod:`~sspectrum.quat` (quaternions, spheres), :mod:`~sspectrum.qmat`
(matrices, exact and scanned S-spectra), :mod:`~sspectrum.sresolvent`
(S-resolvent and Cauchy series), :mod:`~sspectrum.fredholm` (homomorphisms,
Fredholm/Weyl/boundary S-spectra), :mod:`~sspectrum.shiftlab` (shift-plus-
finite-rank operators) and :mod:`~sspectrum.cli`.
"""

__version__ = "0.1.0"

from .quat import Quaternion, Sphere, sphere_of  # noqa: E402
from .qmat import QMatrix, s_spectrum_exact, s_spectrum_scan  # noqa: E402

__all__ = ["Quaternion", "Sphere", "sphere_of", "QMatrix", "s_spectrum_exact", "s_spectrum_scan",
           "data_path", "__version__"]


def data_path(name: str) -> str:
    """Path of a bundled example file, e.g. ``data_path("example-A.json")``."""
    from importlib.resources import files
    return str(files(__name__) / "data" / name)
