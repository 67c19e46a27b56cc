"""Finite-difference solver for the bond PDE, used as an independent oracle.

Solves the backward Black-Scholes equation for the firm value in log space
on each inter-coupon interval, applying the keep/redeem/default payoff at
every coupon date from its own tabulated values.  It shares nothing with
the closed-form pricer except the domain value types, so agreement between
the two is a genuine cross-check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import solve_banded

from .domain import BondSpec, MarketParams, adjusted_coupons, redemption_amount
from .errors import UnstableScheme


@dataclass(frozen=True)
class GridSpec:
    """Log-space grid and time-stepping controls.

    ``x_min``/``x_max`` default to data-driven bounds: four volatility
    standard deviations beyond the lowest payoff anchor and beyond the
    root-search ceiling.
    """

    x_min: float | None = None
    x_max: float | None = None
    nx: int = 1601
    nt_per_interval: int = 400
    scheme: str = "crank_nicolson"

    def __post_init__(self):
        if self.nx < 200:
            raise ValueError("nx must be at least 200")
        if self.nt_per_interval < 1:
            raise ValueError("nt_per_interval must be positive")
        if self.scheme not in ("crank_nicolson", "implicit"):
            raise ValueError("scheme must be 'crank_nicolson' or 'implicit'")
        if self.x_min is not None and self.x_max is not None and self.x_min >= self.x_max:
            raise ValueError("x_min must be below x_max")


def resolve_grid(spec: BondSpec, mkt: MarketParams, grid: GridSpec | None = None) -> GridSpec:
    """Fill in the automatic log-space bounds for a bond/market pair."""
    grid = grid or GridSpec()
    if grid.x_min is not None and grid.x_max is not None:
        return grid
    cbar = adjusted_coupons(spec)
    anchors = [float(cbar[-1])] + [
        a for a in (redemption_amount(spec, k) for k in range(spec.n_dates)) if a > 0
    ]
    stretch = 4.0 * mkt.volatility * math.sqrt(spec.maturity)
    ceiling = 10.0 * (float(cbar.sum()) + spec.face_value)
    x_min = grid.x_min if grid.x_min is not None else math.log(min(anchors)) - stretch - math.log(10.0)
    x_max = grid.x_max if grid.x_max is not None else math.log(ceiling) + stretch
    return replace(grid, x_min=x_min, x_max=x_max)


def _theta_step_matrices(x: np.ndarray, mkt: MarketParams, dt: float, theta: float):
    """LHS banded matrix and RHS tridiagonal coefficients for one theta step."""
    dx = x[1] - x[0]
    s2 = mkt.volatility**2
    mu = mkt.short_rate - mkt.payout_rate - 0.5 * s2
    lower = 0.5 * s2 / dx**2 - 0.5 * mu / dx
    diag = -s2 / dx**2 - mkt.short_rate
    upper = 0.5 * s2 / dx**2 + 0.5 * mu / dx

    n_int = x.size - 2
    band = np.zeros((3, n_int))
    band[0, 1:] = -theta * dt * upper
    band[1, :] = 1.0 - theta * dt * diag
    band[2, :-1] = -theta * dt * lower
    explicit = (1.0 - theta) * dt
    return band, (explicit * lower, 1.0 + explicit * diag, explicit * upper), (
        theta * dt * lower,
        theta * dt * upper,
    )


@dataclass(frozen=True)
class PdeSolution:
    """Tabulated per-subinterval price surfaces on a shared log grid.

    ``values[i]`` has one row per stored time level of subinterval ``i``
    (ascending in calendar time); the last row is the post-decision payoff
    at the right coupon date, the first row the smooth solution at the left
    end.  ``times[i]`` holds the matching calendar times.
    """

    spec: BondSpec
    mkt: MarketParams
    grid: GridSpec
    x: np.ndarray
    times: tuple[np.ndarray, ...]
    values: tuple[np.ndarray, ...]

    def locate(self, t: float, subinterval: int | None = None) -> int:
        dates = self.spec.maturity_dates
        if subinterval is not None:
            lo = 0.0 if subinterval == 0 else dates[subinterval - 1]
            if not (lo - 1e-9 <= t <= dates[subinterval] + 1e-9):
                raise ValueError("t outside the requested subinterval")
            return subinterval
        if t <= 0.0:
            return 0
        idx = int(np.searchsorted(np.asarray(dates), t - 1e-12, side="left"))
        return min(idx, self.spec.n_dates - 1)

    def price(self, V: float, t: float, subinterval: int | None = None) -> float:
        """Bilinear interpolation of the stored surface at (V, t)."""
        if V < 0:
            raise ValueError("firm value must be nonnegative")
        if V == 0.0:
            return 0.0
        i = self.locate(t, subinterval)
        tgrid, surface = self.times[i], self.values[i]
        t_clamped = min(max(t, tgrid[0]), tgrid[-1])
        k = min(int(np.searchsorted(tgrid, t_clamped, side="right")) - 1, tgrid.size - 2)
        k = max(k, 0)
        w = (t_clamped - tgrid[k]) / (tgrid[k + 1] - tgrid[k])
        row = (1.0 - w) * surface[k] + w * surface[k + 1]
        return float(np.interp(math.log(V), self.x, row))

    def slice_at(self, subinterval: int, edge: str = "left") -> np.ndarray:
        return self.values[subinterval][0 if edge == "left" else -1]

    def implied_default_boundaries(self) -> list[float]:
        """Sign-change locations of V - max(floor, keep) at each interior date."""
        out = []
        v = np.exp(self.x)
        cbar = adjusted_coupons(self.spec)
        for k in range(self.spec.n_dates - 1):
            row = self.values[k + 1][0]
            residual = v - np.maximum(redemption_amount(self.spec, k), row + cbar[k])
            out.append(_first_crossing(v, residual))
        return out

    def implied_redemption_boundaries(self, last_index: int) -> list[float]:
        """Root of keep-value minus redemption amount at dates up to ``last_index``."""
        out = []
        v = np.exp(self.x)
        cbar = adjusted_coupons(self.spec)
        for k in range(last_index):
            row = self.values[k + 1][0]
            target = redemption_amount(self.spec, k) - cbar[k]
            out.append(_first_crossing(v, row - target))
        return out


def _first_crossing(v: np.ndarray, residual: np.ndarray) -> float:
    sign = np.sign(residual)
    flips = np.nonzero((sign[:-1] < 0) & (sign[1:] >= 0))[0]
    if flips.size == 0:
        return math.nan
    j = int(flips[0])
    r0, r1 = residual[j], residual[j + 1]
    w = r0 / (r0 - r1) if r1 != r0 else 0.5
    return float(v[j] + w * (v[j + 1] - v[j]))


# Coupon-date payoffs jump where the firm value first covers the better of
# keeping and redeeming.  Projecting them onto the grid by exact cell
# averages (splitting the jump cell at the crossing) keeps the scheme second
# order; nodal sampling would leave an O(dx) error oscillating with the
# jump's offset inside its cell.
_CELL_NODES, _CELL_WEIGHTS = np.polynomial.legendre.leggauss(5)


def _recovery_cell_mean(a: np.ndarray, b: np.ndarray, recovery: float, dx: float) -> np.ndarray:
    """Exact average of ``recovery * e^x`` over [a, b], normalized by dx."""
    return recovery * (np.exp(b) - np.exp(a)) / dx


def _solvent_cell_mean(a, b, best, dx):
    """Gauss-Legendre average of the keep/redeem branch over [a, b] / dx.

    The branch is continuous (piecewise linear with kinks), so the quadrature
    error is third order per cell.
    """
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    xs = mid[..., None] + half[..., None] * _CELL_NODES
    return (best(xs) @ _CELL_WEIGHTS) * half / dx


def _project_payoff(x: np.ndarray, best, recovery: float, crossing: float | None) -> np.ndarray:
    """Cell-averaged payoff ``best(x) if e^x >= best else recovery e^x``.

    ``crossing`` is the log firm value where the solvency indicator flips
    (None when the payoff never defaults on this grid).
    """
    dx = x[1] - x[0]
    lo, hi = x - 0.5 * dx, x + 0.5 * dx
    if crossing is None:
        return _solvent_cell_mean(lo, hi, best, dx)
    out = np.empty_like(x)
    below = hi <= crossing
    above = lo >= crossing
    out[below] = _recovery_cell_mean(lo[below], hi[below], recovery, dx)
    out[above] = _solvent_cell_mean(lo[above], hi[above], best, dx)
    split = ~(below | above)
    if np.any(split):
        a, b = lo[split], hi[split]
        cross = np.full(a.shape, crossing)
        out[split] = _recovery_cell_mean(a, cross, recovery, dx) + _solvent_cell_mean(
            cross, b, best, dx
        )
    return out


def _payoff_crossing(x: np.ndarray, best) -> float | None:
    """Log-space location where ``e^x`` first reaches ``best(x)``."""
    residual = np.exp(x) - best(x)
    sign = np.sign(residual)
    flips = np.nonzero((sign[:-1] < 0) & (sign[1:] >= 0))[0]
    if flips.size == 0:
        return None
    a, b = x[flips[0]], x[flips[0] + 1]
    for _ in range(80):
        mid = 0.5 * (a + b)
        if math.exp(mid) - float(best(np.array(mid))) < 0.0:
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)


def solve_backward(spec: BondSpec, mkt: MarketParams, grid: GridSpec | None = None) -> PdeSolution:
    """March the PDE from maturity to issue, applying coupon-date decisions.

    Crank-Nicolson with two fully implicit start-up steps after every payoff
    application (the payoffs are discontinuous); Dirichlet far-field data
    comes from zero at the bottom and the discounted keep/redeem ceiling at
    the top.  Raises ``UnstableScheme`` if the solution leaves its a-priori
    bounds by more than 1%.
    """
    grid = resolve_grid(spec, mkt, grid)
    n = spec.n_dates
    cbar = adjusted_coupons(spec)
    dates = spec.maturity_dates
    x = np.linspace(grid.x_min, grid.x_max, grid.nx)
    v = np.exp(x)
    nt = grid.nt_per_interval
    r = mkt.short_rate

    # Far-field payoff ceiling per subinterval, by backward recursion.
    ceiling = np.empty(n)
    ceiling[n - 1] = cbar[n - 1]
    for i in range(n - 2, -1, -1):
        keep = math.exp(-r * (dates[i + 1] - dates[i])) * ceiling[i + 1] + cbar[i]
        ceiling[i] = max(keep, redemption_amount(spec, i))

    all_times: list[np.ndarray] = [None] * n
    all_values: list[np.ndarray] = [None] * n

    def maturity_best(xs):
        return np.broadcast_to(cbar[n - 1], np.shape(xs)).astype(float)

    # Nodal payoff is what the surface reports; the marching starts from the
    # cell-averaged projection to keep the scheme second order at the jump.
    vgrid = np.exp(x)
    current_nodal = np.where(vgrid >= cbar[n - 1], cbar[n - 1], mkt.recovery * vgrid)
    current_proj = _project_payoff(x, maturity_best, mkt.recovery, math.log(cbar[n - 1]))

    for i in range(n - 1, -1, -1):
        t_lo = 0.0 if i == 0 else dates[i - 1]
        t_hi = dates[i]
        dt = (t_hi - t_lo) / nt
        tgrid = t_lo + dt * np.arange(nt + 1)
        surface = np.empty((nt + 1, grid.nx))
        surface[nt] = current_nodal

        band_imp, rhs_imp, bc_imp = _theta_step_matrices(x, mkt, dt, 1.0)
        theta_cn = 0.5 if grid.scheme == "crank_nicolson" else 1.0
        band_cn, rhs_cn, bc_cn = _theta_step_matrices(x, mkt, dt, theta_cn)

        w = current_proj.copy()
        for k in range(nt - 1, -1, -1):
            startup = (nt - 1 - k) < 2
            band, (rl, rd, ru), (bl, bu) = (
                (band_imp, rhs_imp, bc_imp) if startup else (band_cn, rhs_cn, bc_cn)
            )
            t_new = tgrid[k]
            rhs = rd * w[1:-1] + rl * w[:-2] + ru * w[2:]
            top_new = math.exp(-r * (t_hi - t_new)) * ceiling[i]
            rhs[0] += bl * 0.0
            rhs[-1] += bu * top_new
            interior = solve_banded((1, 1), band, rhs)
            w = np.concatenate(([0.0], interior, [top_new]))
            surface[k] = w

        all_times[i] = tgrid
        all_values[i] = surface

        if i > 0:
            floor = redemption_amount(spec, i - 1)
            coupon = cbar[i - 1]
            smooth = w  # continuation values on the grid at the coupon date

            def date_best(xs):
                return np.maximum(np.interp(xs, x, smooth) + coupon, floor)

            best_nodal = date_best(x)
            current_nodal = np.where(vgrid >= best_nodal, best_nodal, mkt.recovery * vgrid)
            current_proj = _project_payoff(
                x, date_best, mkt.recovery, _payoff_crossing(x, date_best)
            )

    solution = PdeSolution(
        spec=spec,
        mkt=mkt,
        grid=grid,
        x=x,
        times=tuple(all_times),
        values=tuple(all_values),
    )
    _stability_check(solution, ceiling)
    return solution


def _stability_check(sol: PdeSolution, ceiling: np.ndarray) -> None:
    slack = 0.01
    for i, surface in enumerate(sol.values):
        t_hi = sol.spec.maturity_dates[i]
        bound = np.exp(-sol.mkt.short_rate * (t_hi - sol.times[i])) * ceiling[i]
        overshoot = surface.max(axis=1) - bound * (1.0 + slack)
        if np.any(overshoot > 0) or surface.min() < -slack * sol.spec.face_value:
            raise UnstableScheme(
                f"finite-difference solution left its bounds on subinterval {i}"
            )
