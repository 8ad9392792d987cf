"""Lippmann-Schwinger scattering by parabolic delta walls and confocal parabolic billiards."""
from .analytic import FiniteBarrierScatterer, InfiniteBarrierScatterer, KnifeEdgeScatterer
from .bwm import BoundaryWallScatterer, BwmSystem
from .expansions import SeriesControl, WaveParams
from .geometry import IMPENETRABLE, BilliardSpec, Boundary, ParabolicPoint
from .io import GridSpec
from .spectrum import Resonance, ResonanceSearch, SpectrumScan

__all__ = [
    "IMPENETRABLE",
    "BilliardSpec",
    "Boundary",
    "BoundaryWallScatterer",
    "BwmSystem",
    "FiniteBarrierScatterer",
    "GridSpec",
    "InfiniteBarrierScatterer",
    "KnifeEdgeScatterer",
    "ParabolicPoint",
    "Resonance",
    "ResonanceSearch",
    "SeriesControl",
    "SpectrumScan",
    "WaveParams",
]
