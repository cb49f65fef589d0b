"""Composite Gauss-Legendre quadrature on capped-width panels.

All kernel and rate integrals in this package are oscillatory with a known
local frequency, so adaptivity is organized around panel widths capped by a
quarter period rather than around error indicators: a capped composite rule
is evaluated, every panel is split in two, and the change between the two
passes is the error estimate.
"""

from __future__ import annotations

import functools
from typing import Callable

import numpy as np


@functools.lru_cache(maxsize=None)
def leggauss(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def panel_nodes(edges: np.ndarray, order: int = 6):
    """Nodes and weights of the composite rule over consecutive panels."""
    edges = np.asarray(edges, dtype=float)
    x, w = leggauss(order)
    lo = edges[:-1, None]
    half = 0.5 * (edges[1:, None] - lo)
    nodes = lo + half * (x[None, :] + 1.0)
    weights = half * w[None, :]
    return nodes.ravel(), weights.ravel()


def refine_edges(edges: np.ndarray) -> np.ndarray:
    """Split every panel in two."""
    edges = np.asarray(edges, dtype=float)
    out = np.empty(2 * len(edges) - 1)
    out[0::2] = edges
    out[1::2] = 0.5 * (edges[:-1] + edges[1:])
    return out


def capped_edges(a: float, b: float, max_width: float, min_panels: int = 8) -> np.ndarray:
    """Uniform panel edges on [a, b] with width at most max_width."""
    if b <= a:
        raise ValueError("empty interval [%g, %g]" % (a, b))
    n = max(min_panels, int(np.ceil((b - a) / max_width)))
    return np.linspace(a, b, n + 1)


def geometric_refine_first(edges: np.ndarray, smallest: float, max_extra: int = 40) -> np.ndarray:
    """Subdivide the first panel geometrically toward its left endpoint.

    Inserts edges at left + width/2, width/4, ... until the innermost cell is
    no wider than ``smallest`` (or ``max_extra`` cells were added).  Used to
    resolve integrand structure on a scale much finer than the panel cap,
    e.g. the thermal factor near omega = 0.
    """
    edges = np.asarray(edges, dtype=float)
    left = edges[0]
    width = edges[1] - left
    if width <= smallest:
        return edges
    k = min(max_extra, int(np.ceil(np.log2(width / smallest))))
    inner = left + width * 0.5 ** np.arange(k, 0, -1)
    return np.concatenate([edges[:1], inner, edges[1:]])


def integrate_on_edges(f: Callable, edges: np.ndarray, order: int = 6):
    """Integral of f over the panels; f may return a stack (..., n_nodes)."""
    nodes, w = panel_nodes(edges, order)
    return np.sum(f(nodes) * w, axis=-1)


def integrate_refining(
    f: Callable,
    edges: np.ndarray,
    order: int = 6,
    rtol: float = 1e-9,
    max_refine: int = 8,
    floor: float = 1e-300,
):
    """Integrate with panel doubling until the change drops below rtol.

    Returns (values, errors) with one entry per integrand row returned by f.
    The error is the change under the last doubling, which overestimates the
    error of the returned (finer) value in the asymptotic regime.
    """
    edges = np.asarray(edges, dtype=float)
    vals = np.atleast_1d(integrate_on_edges(f, edges, order))
    err = np.full(vals.shape, np.inf)
    for _ in range(max_refine):
        edges = refine_edges(edges)
        new = np.atleast_1d(integrate_on_edges(f, edges, order))
        err = np.abs(new - vals)
        vals = new
        if np.all(err <= rtol * np.maximum(np.abs(vals), floor)):
            break
    return vals, err
