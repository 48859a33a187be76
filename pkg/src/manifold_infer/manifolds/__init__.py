"""Concrete manifolds: sphere, Stiefel, fixed-rank matrices, rank-one tensors."""

from .base import Chart, Manifold, ManifoldDescriptor
from .fixed_rank import FixedRank
from .rank_one import RankOneTensor
from .sphere import Sphere
from .stiefel import Stiefel

__all__ = [
    "Chart",
    "FixedRank",
    "Manifold",
    "ManifoldDescriptor",
    "RankOneTensor",
    "Sphere",
    "Stiefel",
    "parse_manifold",
]


def parse_manifold(text):
    """Build a manifold from ``name:d1,d2,...``.

    ``sphere:p`` (ambient R^p), ``stiefel:p,r``, ``fixedrank:r,p1,p2``
    and ``rank1tensor:p1,...,pk``.
    """
    name, _, dims = str(text).partition(":")
    name = name.strip().lower()
    try:
        d = [int(s) for s in dims.split(",") if s.strip()]
    except ValueError as exc:
        raise ValueError(f"bad manifold dimensions in {text!r}") from exc
    if name == "sphere" and len(d) == 1:
        return Sphere(d[0])
    if name == "stiefel" and len(d) == 2:
        return Stiefel(d[0], d[1])
    if name == "fixedrank" and len(d) == 3:
        return FixedRank(d[0], d[1], d[2])
    if name == "rank1tensor" and len(d) >= 2:
        return RankOneTensor(tuple(d))
    raise ValueError(f"unknown manifold spec {text!r}")
