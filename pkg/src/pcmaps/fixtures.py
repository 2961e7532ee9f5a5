"""Reference maps used by the tests, the CLI and the documentation."""

from __future__ import annotations

from .pcmap import PCMap, build_map


def gap_family(n: int | None = None, order: int = 1) -> PCMap:
    """Two affine branches of slope 1/2 on [0, 1].

    With ``n=None`` the breakpoint is 1/2 and the branches are x/2 + 1/2 and
    x/2 - 1/4. For an integer n >= 1 the breakpoint moves to n/(2(n+2)) and the
    intercepts to (n+4)/(2(n+2)) and -n/(4(n+2)); these maps converge to the
    first one piecewise but not uniformly.
    """
    if n is None:
        return build_map((0, 1), [0.5], ["x/2 + 1/2", "x/2 - 1/4"], order)
    if n < 1:
        raise ValueError("n must be >= 1")
    return build_map((0, 1), [n / (2 * (n + 2))],
                     [f"x/2 + {n + 4}/{2 * (n + 2)}", f"x/2 - {n}/{4 * (n + 2)}"], order)


def shrinking_ramp(n: int) -> PCMap:
    """x/2^n on [0, 2^-(n+1)) and 0 afterwards (order 0)."""
    if n < 0:
        raise ValueError("n must be >= 0")
    return build_map((0, 1), [0.5 ** (n + 1)], [f"x/2^{n}" if n else "x", "0"], 0)


def collapsing_pair(n: int) -> PCMap:
    """x/2 on [0, 1/n) and x/2 + 1/2 afterwards (order 0); piece 1 shrinks with n."""
    if n < 2:
        raise ValueError("n must be >= 2")
    return build_map((0, 1), [1.0 / n], ["x/2", "x/2 + 1/2"], 0)


def doubling(order: int = 1) -> PCMap:
    return build_map((0, 1), [0.5], ["2*x", "2*x - 1"], order)


def contracting(order: int = 1) -> PCMap:
    """Both branches contract by 1/3; every orbit tends to the fixed point 0.15."""
    return build_map((0, 1), [0.5], ["x/3 + 0.1", "x/3 + 0.05"], order)


def quadratic_bump(order: int = 2) -> PCMap:
    """A parabola with its vertex at x = 0.25 on the first piece, affine on the second."""
    return build_map((0, 1), [0.5], ["-2*(x - 0.25)^2 + 0.5", "x/2 + 0.25"], order)
