"""Metropolis sampling of the eigenvalue gas

    P(z_1..z_n) ~ prod_{i<j} |z_i - z_j|^2 exp(-n sum_i V(z_i)),

V(z) = |z|^2 - t Re z^2, with single-particle Gaussian proposals and a
systematic scan (one sweep = n proposals).  Random numbers come from numpy's
PCG64 in fixed-size blocks, so a chain is reproducible from its seed.  The
inner loop is compiled with numba when it is installed and runs as plain
Python otherwise; both consume the same random blocks.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, InvalidArgument
from .orthopoly import CanonicalModel

try:
    import numba
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None

__all__ = [
    "GasConfig",
    "GasState",
    "ChainResult",
    "Grid",
    "HistogramDensity",
    "RNG_ALGORITHM",
    "log_weight",
    "run_chain",
    "histogram_density",
    "snapshot_records",
]

RNG_ALGORITHM = "PCG64"
MAX_PARTICLES = 64
_BLOCK_SWEEPS = 2048


@dataclass(frozen=True)
class GasConfig:
    n: int
    t: float
    sweeps: int
    burnin: int = 0
    seed: int = 0
    step: float | None = None
    thin: int = 1

    def __post_init__(self):
        if not 1 <= self.n <= MAX_PARTICLES:
            raise DomainError(f"need 1 <= n <= {MAX_PARTICLES}")
        if not 0.0 <= self.t < 1.0:
            raise DomainError("t must lie in [0, 1)")
        if not self.sweeps > self.burnin >= 0:
            raise DomainError("need sweeps > burnin >= 0")
        if self.seed < 0:
            raise DomainError("seed must be nonnegative")
        if self.thin < 1:
            raise DomainError("thin must be positive")
        if self.step is not None and not self.step > 0:
            raise DomainError("step must be positive")

    @property
    def step_size(self) -> float:
        return self.step if self.step is not None else 1.0 / math.sqrt(self.n)


@dataclass(frozen=True)
class GasState:
    positions: np.ndarray
    log_weight: float
    sweep: int = 0


@dataclass
class ChainResult:
    """Snapshots after burn-in plus chain diagnostics."""

    snapshots: list
    acceptance_rate: float
    final_log_weight: float
    final_positions: np.ndarray
    rng_algorithm: str = RNG_ALGORITHM
    proposal_deltas: np.ndarray | None = None
    proposal_accepted: np.ndarray | None = None
    compiled: bool = False

    def __len__(self):
        return len(self.snapshots)

    def __iter__(self):
        return iter(self.snapshots)

    def __getitem__(self, k):
        return self.snapshots[k]

    def positions(self) -> np.ndarray:
        """All snapshot positions stacked as (snapshots, n)."""
        return np.array([s.positions for s in self.snapshots])


def log_weight(positions, model: CanonicalModel) -> float:
    """sum_{i<j} 2 log|z_i - z_j| - n sum_i V(z_i); -inf for coincident points."""
    z = np.asarray(positions, dtype=complex).ravel()
    if not np.all(np.isfinite(z)):
        raise InvalidArgument("positions must be finite")
    total = -model.n * float(np.sum(model.potential(z)))
    if z.size > 1:
        d = np.abs(z[:, None] - z[None, :])[np.triu_indices(z.size, 1)]
        if np.any(d == 0):
            return -math.inf
        total += 2.0 * float(np.sum(np.log(d)))
    return total


def _sweep_block(re, im, n, t, step, normals, uniforms, deltas, accepted, record):
    """Run len(uniforms) sweeps in place; returns (log-weight change, accepts)."""
    nsw = uniforms.shape[0]
    npart = re.shape[0]
    total = 0.0
    acc = 0
    k = 0
    for s in range(nsw):
        for i in range(npart):
            xo = re[i]
            yo = im[i]
            xn = xo + step * normals[s, i, 0]
            yn = yo + step * normals[s, i, 1]
            vo = (1.0 - t) * xo * xo + (1.0 + t) * yo * yo
            vn = (1.0 - t) * xn * xn + (1.0 + t) * yn * yn
            delta = -n * (vn - vo)
            for j in range(npart):
                if j != i:
                    dxn = xn - re[j]
                    dyn = yn - im[j]
                    dxo = xo - re[j]
                    dyo = yo - im[j]
                    # 2 log|.| = log|.|^2
                    delta += math.log(dxn * dxn + dyn * dyn) - math.log(dxo * dxo + dyo * dyo)
            ok = math.log(uniforms[s, i]) < delta
            if ok:
                re[i] = xn
                im[i] = yn
                total += delta
                acc += 1
            if record:
                deltas[k] = delta
                accepted[k] = ok
            k += 1
    return total, acc


if numba is not None:
    _sweep_block_fast = numba.njit(cache=True)(_sweep_block)
else:  # pragma: no cover
    _sweep_block_fast = None


def run_chain(cfg: GasConfig, model: CanonicalModel | None = None,
              record_proposals: bool = False, compiled: bool | None = None) -> ChainResult:
    """Run a Metropolis chain; snapshots every ``thin`` sweeps after burn-in."""
    model = model or CanonicalModel(cfg.n, cfg.t)
    if model.n != cfg.n or model.t != cfg.t:
        raise InvalidArgument("model and configuration disagree on (n, t)")
    use_fast = (_sweep_block_fast is not None) if compiled is None else compiled
    if use_fast and _sweep_block_fast is None:
        raise InvalidArgument("numba is not available")
    block_fn = _sweep_block_fast if use_fast else _sweep_block

    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    n = cfg.n
    a = math.sqrt((1.0 + cfg.t) / (1.0 - cfg.t))
    b = math.sqrt((1.0 - cfg.t) / (1.0 + cfg.t))
    start = rng.uniform(-0.5, 0.5, size=(n, 2))
    re = np.ascontiguousarray(start[:, 0] * a)
    im = np.ascontiguousarray(start[:, 1] * b)
    logw = log_weight(re + 1j * im, model)

    snapshots = []
    deltas_all, acc_all = [], []
    accepts_after = 0
    done = 0
    while done < cfg.sweeps:
        nsw = min(_BLOCK_SWEEPS, cfg.sweeps - done)
        normals = rng.standard_normal((nsw, n, 2))
        uniforms = rng.random((nsw, n))
        # chunk the block at snapshot and burn-in boundaries
        s = 0
        while s < nsw:
            sweep_idx = done + s
            if sweep_idx < cfg.burnin:
                target = cfg.burnin
            else:
                target = cfg.burnin + ((sweep_idx - cfg.burnin) // cfg.thin + 1) * cfg.thin
            stop = min(nsw, target - done)
            count = stop - s
            if record_proposals:
                dbuf = np.empty(count * n)
                abuf = np.empty(count * n, dtype=np.bool_)
            else:
                dbuf = np.empty(0)
                abuf = np.empty(0, dtype=np.bool_)
            dlog, acc = block_fn(re, im, float(n), cfg.t, cfg.step_size,
                                 normals[s:stop], uniforms[s:stop], dbuf, abuf, record_proposals)
            logw += dlog
            if record_proposals:
                deltas_all.append(dbuf)
                acc_all.append(abuf)
            end_sweep = done + stop
            if end_sweep > cfg.burnin:
                accepts_after += acc
                if (end_sweep - cfg.burnin) % cfg.thin == 0:
                    snapshots.append(GasState(re + 1j * im, logw, end_sweep))
            s = stop
        done += nsw

    proposals_after = (cfg.sweeps - cfg.burnin) * n
    rate = accepts_after / proposals_after
    if not 0.05 <= rate <= 0.95:
        warnings.warn(f"acceptance rate {rate:.3f} outside [0.05, 0.95]; consider another step size",
                      RuntimeWarning, stacklevel=2)
    return ChainResult(
        snapshots=snapshots,
        acceptance_rate=rate,
        final_log_weight=logw,
        final_positions=re + 1j * im,
        proposal_deltas=np.concatenate(deltas_all) if record_proposals else None,
        proposal_accepted=np.concatenate(acc_all) if record_proposals else None,
        compiled=use_fast,
    )


@dataclass(frozen=True)
class Grid:
    """Rectangle [xmin, xmax] x [ymin, ymax] with nx by ny points or cells."""

    xmin: float
    xmax: float
    nx: int
    ymin: float
    ymax: float
    ny: int

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise InvalidArgument("grid resolution must be positive")
        if not (self.xmax >= self.xmin and self.ymax >= self.ymin):
            raise InvalidArgument("grid bounds must be increasing")

    def xs(self) -> np.ndarray:
        return np.linspace(self.xmin, self.xmax, self.nx)

    def ys(self) -> np.ndarray:
        return np.linspace(self.ymin, self.ymax, self.ny)

    def points(self) -> np.ndarray:
        """Node points, row-major: shape (ny, nx)."""
        return self.xs()[None, :] + 1j * self.ys()[:, None]

    def x_edges(self) -> np.ndarray:
        return np.linspace(self.xmin, self.xmax, self.nx + 1)

    def y_edges(self) -> np.ndarray:
        return np.linspace(self.ymin, self.ymax, self.ny + 1)

    def cell_centers(self) -> np.ndarray:
        xe, ye = self.x_edges(), self.y_edges()
        xc = 0.5 * (xe[1:] + xe[:-1])
        yc = 0.5 * (ye[1:] + ye[:-1])
        return xc[None, :] + 1j * yc[:, None]

    @property
    def cell_area(self) -> float:
        return (self.xmax - self.xmin) / self.nx * (self.ymax - self.ymin) / self.ny


@dataclass(frozen=True)
class HistogramDensity:
    """Per-area density on the grid cells (shape (ny, nx)) and the mass outside."""

    density: np.ndarray
    outside_mass: float
    grid: Grid
    samples: int

    def total_mass(self) -> float:
        return float(np.sum(self.density) * self.grid.cell_area + self.outside_mass)


def histogram_density(snapshots: Sequence, grid: Grid) -> HistogramDensity:
    """Normalised 2D histogram of all particle positions, comparable to rho_n."""
    if len(snapshots) == 0:
        raise InvalidArgument("no snapshots")
    if isinstance(snapshots, ChainResult):
        snapshots = snapshots.snapshots
    pts = np.concatenate([np.asarray(s.positions if isinstance(s, GasState) else s).ravel()
                          for s in snapshots])
    counts, _, _ = np.histogram2d(pts.imag, pts.real, bins=[grid.y_edges(), grid.x_edges()])
    total = pts.size
    inside = float(np.sum(counts))
    dens = counts / (total * grid.cell_area)
    return HistogramDensity(dens, (total - inside) / total, grid, total)


def snapshot_records(result: ChainResult) -> list:
    """Snapshots as plain dicts with complex positions split into re/im."""
    return [
        {
            "sweep": s.sweep,
            "log_weight": s.log_weight,
            "positions": [{"re": float(z.real), "im": float(z.imag)} for z in s.positions],
        }
        for s in result.snapshots
    ]
