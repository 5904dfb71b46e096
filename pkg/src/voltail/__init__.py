"""Tail asymptotics for one-dimensional diffusions, CEV and time-changed CEV models."""

__version__ = "0.1.0"

from .volmodel import DriftSpec, VolModel  # noqa: E402
from .cev import CevParams  # noqa: E402
from .timechange import CirParams, CriticalMoment  # noqa: E402
from .montecarlo import McConfig, McEstimate  # noqa: E402

__all__ = ["VolModel", "DriftSpec", "CevParams", "CirParams", "CriticalMoment", "McConfig", "McEstimate",
           "__version__"]
