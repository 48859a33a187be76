"""Shared fixtures-as-functions for manifold and loss tests."""

import numpy as np

from manifold_infer.manifolds import FixedRank, RankOneTensor, Sphere, Stiefel

MANIFOLD_NAMES = ("sphere", "stiefel", "fixedrank", "rank1tensor")


def make_manifold(name):
    return {
        "sphere": lambda: Sphere(3),
        "stiefel": lambda: Stiefel(4, 2),
        "fixedrank": lambda: FixedRank(2, 4, 4),
        "rank1tensor": lambda: RankOneTensor((3, 3, 3)),
    }[name]()


def random_point(m, rng):
    if isinstance(m, FixedRank):
        # well separated singular values keep the chart regular
        U = np.linalg.qr(rng.standard_normal((m.p1, m.r)))[0]
        V = np.linalg.qr(rng.standard_normal((m.p2, m.r)))[0]
        s = np.sort(rng.uniform(1.0, 4.0, m.r))[::-1] + np.arange(m.r)[::-1]
        return (U * s) @ V.T
    return m.random_point(rng)


def random_coords(m, rng, radius=0.1):
    v = rng.standard_normal(m.dim)
    return v * rng.uniform(0.01, radius) / np.linalg.norm(v)


def random_tangent(m, x, rng):
    return m.chart(x).tangent(rng.standard_normal(m.dim))


def gaussian_data(m, x, rng, n=30, scale=0.5):
    return x + scale * rng.standard_normal((n,) + m.ambient_shape)
