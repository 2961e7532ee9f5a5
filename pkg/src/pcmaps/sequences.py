"""Finite prefixes of map sequences: pairwise distances, piece collapse and
limit estimates via the chains of deformed probe points."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import quad

from .errors import CollapseDetected, FormatError, ShapeMismatch, TooShort
from .metrics import Bounds, KernelOptions, comp_metric
from .pcmap import PCMap, _branch_jets, load_map_file, xi_deform

STABLE_FACTOR = 10.0


@dataclass(frozen=True)
class MapSequence:
    maps: tuple[PCMap, ...]

    def __post_init__(self):
        maps = tuple(self.maps)
        object.__setattr__(self, "maps", maps)
        if len(maps) < 2:
            raise TooShort("a sequence needs at least two maps", {"length": len(maps)})
        first = maps[0]
        for k, f in enumerate(maps[1:], start=1):
            if f.domain != first.domain or f.N != first.N or f.order != first.order:
                raise ShapeMismatch(f"map {k} differs in domain, piece count or order from map 0",
                                    {"index": k})

    def __len__(self) -> int:
        return len(self.maps)

    def __getitem__(self, k):
        return self.maps[k]

    @property
    def N(self) -> int:
        return self.maps[0].N

    def lengths(self) -> np.ndarray:
        """Piece lengths, shape (M, N)."""
        return np.array([f.piece_lengths() for f in self.maps])


def load_sequence(path: str | Path) -> MapSequence:
    """Maps from a directory (files in lexicographic order) or a manifest file
    listing one path per line (relative to the manifest)."""
    path = Path(path)
    if path.is_dir():
        files = sorted(p for p in path.iterdir() if p.is_file() and not p.name.startswith("."))
    else:
        files = []
        for line in path.read_text(encoding="utf-8").splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                p = Path(line)
                files.append(p if p.is_absolute() else path.parent / p)
    if not files:
        raise FormatError(f"no maps found at {str(path)!r}", {"path": str(path)})
    return MapSequence(tuple(load_map_file(p) for p in files))


def pairwise_comp(seq: MapSequence, r: int = 0, opts: KernelOptions | None = None) -> list[list[Bounds]]:
    """Symmetric matrix of comp^r bounds between all members."""
    M = len(seq)
    out: list[list[Bounds | None]] = [[None] * M for _ in range(M)]
    for a in range(M):
        out[a][a] = comp_metric(seq[a], seq[a], r, opts)
        for b in range(a + 1, M):
            out[a][b] = out[b][a] = comp_metric(seq[a], seq[b], r, opts)
    return out


@dataclass(frozen=True)
class PieceTrend:
    lengths: tuple[float, ...]
    flag: str  # collapsing | stable | inconclusive


@dataclass(frozen=True)
class CollapseReport:
    kappa_hat: int
    per_piece: tuple[PieceTrend, ...]
    tol_c: float
    window: int
    note: str = ("heuristic: a piece counts as collapsing when its final length is below tol_c "
                 "and its length did not increase over the window")

    def to_dict(self) -> dict:
        return {"kappa_hat": self.kappa_hat, "tol_c": self.tol_c, "window": self.window,
                "note": self.note,
                "pieces": [{"piece": i, "flag": p.flag, "final_length": p.lengths[-1],
                            "window_lengths": list(p.lengths[-self.window:])}
                           for i, p in enumerate(self.per_piece, start=1)]}


def collapse_estimate(seq: MapSequence, tol_c: float = 1e-3, window: int = 5) -> CollapseReport:
    M = len(seq)
    if M < window:
        raise TooShort(f"sequence of length {M} is shorter than the window {window}",
                       {"length": M, "window": window})
    L = seq.lengths()
    trends = []
    for i in range(seq.N):
        col = L[:, i]
        tail = col[-window:]
        if col[-1] < tol_c and np.all(np.diff(tail) <= 0):
            flag = "collapsing"
        elif np.all(tail >= STABLE_FACTOR * tol_c):
            flag = "stable"
        else:
            flag = "inconclusive"
        trends.append(PieceTrend(tuple(float(v) for v in col), flag))
    kappa = sum(t.flag == "collapsing" for t in trends)
    return CollapseReport(kappa, tuple(trends), tol_c, window)


def chain_points(seq: MapSequence, probes: np.ndarray) -> np.ndarray:
    """s_0 = probes, s_n = xi(f_{n-1}, f_n; s_{n-1}); shape (M, len(probes))."""
    out = np.empty((len(seq), len(probes)))
    out[0] = probes
    for n in range(1, len(seq)):
        out[n] = xi_deform(seq[n - 1], seq[n], out[n - 1])
    return out


def probe_points(f: PCMap, per_piece: int) -> tuple[np.ndarray, np.ndarray]:
    """Stratum midpoints inside each piece, with their piece indices."""
    xs, pieces = [], []
    for i in range(1, f.N + 1):
        a, b = f.piece(i)
        t = (np.arange(per_piece) + 0.5) / per_piece
        xs.append(a + (b - a) * t)
        pieces.append(np.full(per_piece, i))
    return np.concatenate(xs), np.concatenate(pieces)


@dataclass(frozen=True)
class LimitEstimate:
    representative: PCMap
    tail_bound: float
    probes: np.ndarray          # probe points in f_0
    probe_pieces: np.ndarray    # their piece indices
    chain_points: np.ndarray    # (M, P) deformed probes
    probe_values: np.ndarray    # (M, P) values f_n(s_n(x)) from the matching branch
    oscillation: np.ndarray     # (P,) spread of probe values over the tail window
    window: int
    integral_defect: float | None = None

    @property
    def shadowing_ok(self) -> bool:
        return bool(np.all(self.oscillation <= self.tail_bound + 1e-9))

    def to_dict(self) -> dict:
        return {"tail_bound": self.tail_bound, "window": self.window,
                "max_oscillation": float(self.oscillation.max()),
                "shadowing_ok": self.shadowing_ok, "integral_defect": self.integral_defect,
                "probes": [{"x": float(x), "piece": int(i), "final_chain_point": float(s),
                            "oscillation": float(o)}
                           for x, i, s, o in zip(self.probes, self.probe_pieces,
                                                 self.chain_points[-1], self.oscillation)]}


def limit_estimate(seq: MapSequence, r: int = 0, probes: int = 16, window: int = 5,
                   tol_c: float = 1e-3, opts: KernelOptions | None = None) -> LimitEstimate:
    """Represent the limit of a non-collapsing Cauchy prefix by its last member."""
    report = collapse_estimate(seq, tol_c, window)
    if report.kappa_hat > 0:
        raise CollapseDetected(f"{report.kappa_hat} piece(s) collapse; the sequence has no limit "
                               "with the same number of pieces",
                               {"kappa_hat": report.kappa_hat,
                                "pieces": [i for i, p in enumerate(report.per_piece, start=1)
                                           if p.flag == "collapsing"]})
    M = len(seq)
    T = min(window, M)
    tail = list(range(M - T, M))
    tail_bound = 0.0
    for a in tail:
        for b in tail:
            if a < b:
                tail_bound = max(tail_bound, comp_metric(seq[a], seq[b], r, opts).upper)
    xs, pieces = probe_points(seq[0], probes)
    chains = chain_points(seq, xs)
    values = np.empty_like(chains)
    for n, f in enumerate(seq.maps):
        for i in range(1, f.N + 1):
            sel = pieces == i
            values[n, sel] = _branch_jets(f, i, chains[n, sel], 0)[0]
    window_vals = values[M - T:]
    osc = window_vals.max(axis=0) - window_vals.min(axis=0)
    defect = _integral_defect(seq[-1], chains[-1], pieces) if r >= 1 else None
    return LimitEstimate(seq[-1], float(tail_bound), xs, pieces, chains, values, osc, T, defect)


def _integral_defect(f: PCMap, ys: np.ndarray, pieces: np.ndarray) -> float:
    """max |f(y) - f(a) - integral_a^y f'| over probes y, a the piece's left end."""
    worst = 0.0
    for y, i in zip(ys.tolist(), pieces.tolist()):
        a = f.piece(i)[0]
        fy, fa = _branch_jets(f, i, np.array([y, a]), 0)[0]
        integral, _ = quad(lambda t: float(_branch_jets(f, i, np.array([t]), 1)[1][0]), a, y,
                           epsabs=1e-13, epsrel=1e-12, limit=200)
        worst = max(worst, abs((fy - fa) - integral))
    return worst
