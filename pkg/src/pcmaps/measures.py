"""Ulam discretization of the transfer operator and its stationary vector."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import InvalidArgument, ShapeMismatch
from .expr import affine_coefficients
from .pcmap import PCMap, _branch_jets

DAMPING = 1e-8


@dataclass(frozen=True, eq=False)
class UlamOperator:
    edges: np.ndarray      # k'+1 increasing cell boundaries
    matrix: np.ndarray     # k' x k' row-stochastic
    samples_per_cell: int
    method: str            # "sample" | "exact"
    seed: int

    @property
    def size(self) -> int:
        return len(self.edges) - 1


def ulam_cells(f: PCMap, k: int) -> np.ndarray:
    """k uniform cells refined so every breakpoint is a cell boundary."""
    lo, hi = f.domain
    uniform = np.linspace(lo, hi, k + 1)
    uniform[0], uniform[-1] = lo, hi
    return np.union1d(uniform, np.asarray(f.breakpoints))


def _cell_index(edges: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.clip(np.searchsorted(edges, y, side="right") - 1, 0, len(edges) - 2)


def ulam_operator(f: PCMap, k: int, Q: int = 64, seed: int = 0, method: str = "sample") -> UlamOperator:
    """Transition fractions between cells.

    ``method="sample"`` maps Q jittered stratified points per cell; ``"exact"``
    (affine branches only) uses the exact overlap of each cell's image with
    every cell.
    """
    if k < 2:
        raise InvalidArgument("need at least two cells", {"k": k})
    if Q < 1:
        raise InvalidArgument("need at least one sample per cell", {"Q": Q})
    edges = ulam_cells(f, k)
    n = len(edges) - 1
    mids = 0.5 * (edges[:-1] + edges[1:])
    pieces = np.searchsorted(np.asarray(f.breakpoints), mids) + 1
    P = np.zeros((n, n))
    if method == "exact":
        coeffs = [affine_coefficients(b) if f.reparam is None else None for b in f.branches]
        if any(c is None for c in coeffs) or f.clamp:
            raise InvalidArgument("exact mode needs affine branches", None)
        for a in range(n):
            slope, icpt = coeffs[pieces[a] - 1]
            y0, y1 = slope * edges[a] + icpt, slope * edges[a + 1] + icpt
            lo, hi = min(y0, y1), max(y0, y1)
            if hi == lo:
                P[a, _cell_index(edges, np.array([lo]))[0]] = 1.0
                continue
            overlap = np.clip(np.minimum(edges[1:], hi) - np.maximum(edges[:-1], lo), 0.0, None)
            P[a] = overlap / overlap.sum()
    elif method == "sample":
        rng = np.random.default_rng(seed)
        jitter = rng.uniform(-0.25, 0.25, size=(n, Q))
        t = (np.arange(Q)[None, :] + 0.5 + jitter) / Q
        xs = edges[:-1, None] + (edges[1:] - edges[:-1])[:, None] * t
        for i in range(1, f.N + 1):
            rows = np.nonzero(pieces == i)[0]
            if not rows.size:
                continue
            ys = _branch_jets(f, i, xs[rows].ravel(), 0)[0].reshape(len(rows), Q)
            targets = _cell_index(edges, ys)
            for r, tgt in zip(rows, targets):
                P[r] = np.bincount(tgt, minlength=n) / Q
    else:
        raise InvalidArgument(f"unknown method {method!r}", {"method": method})
    return UlamOperator(edges, P, Q, method, seed)


@dataclass(frozen=True, eq=False)
class MeasureVector:
    weights: np.ndarray
    iterations: int
    residual: float           # ||mu P - mu||_1
    damped_residual: float
    converged: bool
    recurrent_classes: int

    @property
    def multimodal(self) -> bool:
        return self.recurrent_classes > 1

    def to_dict(self) -> dict:
        return {"residual": self.residual, "damped_residual": self.damped_residual,
                "iterations": self.iterations, "converged": self.converged,
                "cells": int(self.weights.size), "recurrent_classes": self.recurrent_classes,
                "multimodal": self.multimodal}


def recurrent_class_count(P: np.ndarray) -> int:
    """Number of closed communicating classes of the support graph."""
    graph = csr_matrix(P > 0)
    ncomp, labels = connected_components(graph, directed=True, connection="strong")
    rows, cols = graph.nonzero()
    leaves = labels[rows] != labels[cols]
    open_classes = set(labels[rows[leaves]].tolist())
    return ncomp - len(open_classes)


def stationary_measure(op: UlamOperator, tol: float = 1e-12, max_iter: int = 100_000,
                       damping: float = DAMPING) -> MeasureVector:
    """Lazy power iteration from the uniform vector.

    A damped phase (uniform restart with weight ``damping``) picks a stationary
    vector even for reducible chains; an undamped phase then polishes it. The
    reported residual is the undamped one.
    """
    P = op.matrix
    n = P.shape[0]
    u = np.full(n, 1.0 / n)
    mu = u.copy()
    it = 0
    damped_res = math.inf
    # damped phase: stop once the remaining drift is at the damping scale
    while it < max_iter:
        step = (1.0 - damping) * (mu @ P) + damping * u
        damped_res = float(np.abs(step - mu).sum())
        if damped_res <= max(tol, 10 * damping):
            break
        mu = 0.5 * (mu + step)
        mu /= mu.sum()
        it += 1
    res = float(np.abs(mu @ P - mu).sum())
    while res > tol and it < max_iter:
        mu = 0.5 * (mu + mu @ P)
        mu = np.clip(mu, 0.0, None)
        mu /= mu.sum()
        res = float(np.abs(mu @ P - mu).sum())
        it += 1
    return MeasureVector(mu, it, res, damped_res, res <= tol, recurrent_class_count(P))


def invariance_residual(f: PCMap, mu: MeasureVector | np.ndarray, op: UlamOperator) -> float:
    """||mu P - mu||_1 recomputed column by column with compensated sums."""
    w = mu.weights if isinstance(mu, MeasureVector) else np.asarray(mu, float)
    n = op.size
    if w.shape != (n,):
        raise ShapeMismatch(f"measure has {w.size} cells, operator has {n}",
                            {"measure": int(w.size), "operator": n})
    if not set(f.breakpoints) <= set(op.edges.tolist()) or op.edges[0] != f.domain[0] \
            or op.edges[-1] != f.domain[1]:
        raise ShapeMismatch("operator cells do not belong to this map", None)
    wl = w.tolist()
    total = []
    for b in range(n):
        col = op.matrix[:, b].tolist()
        total.append(abs(math.fsum([wa * pab for wa, pab in zip(wl, col)] + [-wl[b]])))
    return math.fsum(total)


def histogram_rows(op: UlamOperator, mu: MeasureVector) -> list[tuple[float, float, float]]:
    return [(float(a), float(b), float(w)) for a, b, w in zip(op.edges[:-1], op.edges[1:], mu.weights)]
