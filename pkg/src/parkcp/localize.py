"""Position estimators: GCPSO cost minimisation, a range-fusing EKF, and the
closed-form trilateration/bilateration used as oracles and for the stationary
bootstrap.

The cost a swarm minimises is the sum of squared range mismatches to the
selected neighbors plus the squared displacement from the dead-reckoned
prior. The EKF keeps a 2D position state; velocity enters as a known noisy
input, so the prediction inflates the covariance by
process_std^2 + (step_seconds * velocity_std)^2 per axis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGeometryError
from .model import Position2D, Velocity2D
from .policy import Candidate

_COINCIDENT = 1e-6  # meters below which a range row is skipped in the EKF


@dataclass(frozen=True)
class GcpsoParams:
    """Guaranteed-convergence PSO settings.

    The best particle resamples a box of half-width ``radius`` around the
    global best; the radius doubles after ``success_limit`` consecutive
    improvements and halves after ``failure_limit`` consecutive failures.
    """

    particles: int = 4
    iterations: int = 20
    success_limit: int = 15
    failure_limit: int = 5
    initial_radius: float = 1.0
    cognitive: float = 2.0
    social: float = 2.0
    inertia_start: float = 0.9
    inertia_end: float = 0.2
    fitness_stop: float = 0.0

    def __post_init__(self):
        if self.particles < 1 or self.iterations < 1:
            raise ValueError("particles and iterations must be >= 1")
        if self.success_limit < 1 or self.failure_limit < 1:
            raise ValueError("success_limit and failure_limit must be >= 1")
        if self.initial_radius <= 0:
            raise ValueError("initial_radius must be > 0")
        if not self.inertia_start >= self.inertia_end >= 0:
            raise ValueError("inertia must decrease to a non-negative value")


@dataclass(frozen=True)
class EkfParams:
    range_std: float
    process_std: float = 2.0
    velocity_std: float = 0.5
    step_seconds: float = 1.0

    def __post_init__(self):
        if min(self.range_std, self.process_std, self.velocity_std, self.step_seconds) <= 0:
            raise ValueError("EKF parameters must be > 0")


@dataclass(frozen=True)
class LocalizationProblem:
    """One vehicle's localisation instance at one step: the (at most three)
    selected neighbors plus the dead-reckoned prior."""

    selected: tuple[Candidate, ...]
    prior: Position2D
    velocity: Velocity2D = Velocity2D(0.0, 0.0)
    step_seconds: float = 1.0


def cost(point: Position2D, problem: LocalizationProblem) -> float:
    """Squared range mismatches to the selected neighbors plus squared
    distance to the prior."""
    total = (point.x - problem.prior.x) ** 2 + (point.y - problem.prior.y) ** 2
    for cand in problem.selected:
        sp = cand.shared_position
        mismatch = cand.range.distance - math.hypot(point.x - sp.x, point.y - sp.y)
        total += mismatch * mismatch
    return total


@dataclass
class RadiusAdaptation:
    """Success/failure-counted doubling and halving of the search radius."""

    radius: float
    success_limit: int
    failure_limit: int
    successes: int = 0
    failures: int = 0

    def update(self, improved: bool) -> float:
        if improved:
            self.successes += 1
            self.failures = 0
            if self.successes >= self.success_limit:
                self.radius *= 2.0
                self.successes = 0
        else:
            self.failures += 1
            self.successes = 0
            if self.failures >= self.failure_limit:
                self.radius *= 0.5
                self.failures = 0
        return self.radius


@dataclass
class GcpsoResult:
    position: Position2D
    fitness: float
    history: np.ndarray = field(repr=False)  # global-best fitness per iteration


def gcpso_localize(
    problem: LocalizationProblem, params: GcpsoParams, rng: np.random.Generator
) -> GcpsoResult:
    """Minimise the localisation cost with a guaranteed-convergence PSO.

    The swarm starts with half the particles on the highest-priority
    neighbor's shared position and half on the prior (all on the prior when
    there is no neighbor), with zero initial velocities. Inertia decreases
    linearly across iterations; the globally best particle performs the
    box-resampling update instead of the standard velocity rule.
    """
    n = params.particles
    ax = [c.shared_position.x for c in problem.selected]
    ay = [c.shared_position.y for c in problem.selected]
    ar = [c.range.distance for c in problem.selected]
    px0, py0 = problem.prior

    def evaluate(x: float, y: float) -> float:
        f = (x - px0) ** 2 + (y - py0) ** 2
        for j in range(len(ax)):
            m = ar[j] - math.hypot(x - ax[j], y - ay[j])
            f += m * m
        return f

    if problem.selected:
        bx, by = ax[0], ay[0]
        xs = [bx if i < n // 2 else px0 for i in range(n)]
        ys = [by if i < n // 2 else py0 for i in range(n)]
    else:
        xs = [px0] * n
        ys = [py0] * n
    vx = [0.0] * n
    vy = [0.0] * n

    best_x = list(xs)
    best_y = list(ys)
    best_f = [evaluate(x, y) for x, y in zip(xs, ys)]
    g = min(range(n), key=lambda i: best_f[i])
    gx, gy, gf = best_x[g], best_y[g], best_f[g]
    history = [gf]

    radius = RadiusAdaptation(params.initial_radius, params.success_limit, params.failure_limit)
    span = max(params.iterations - 1, 1)
    for it in range(params.iterations):
        if gf <= params.fitness_stop:
            break
        w = params.inertia_start + (params.inertia_end - params.inertia_start) * (it / span)
        u = rng.random((n, 4))
        for i in range(n):
            if i == g:
                nx = gx + w * vx[i] + radius.radius * (1.0 - 2.0 * u[i, 0])
                ny = gy + w * vy[i] + radius.radius * (1.0 - 2.0 * u[i, 1])
                vx[i], vy[i] = nx - xs[i], ny - ys[i]
                xs[i], ys[i] = nx, ny
            else:
                vx[i] = (
                    w * vx[i]
                    + params.cognitive * u[i, 0] * (best_x[i] - xs[i])
                    + params.social * u[i, 2] * (gx - xs[i])
                )
                vy[i] = (
                    w * vy[i]
                    + params.cognitive * u[i, 1] * (best_y[i] - ys[i])
                    + params.social * u[i, 3] * (gy - ys[i])
                )
                xs[i] += vx[i]
                ys[i] += vy[i]
            f = evaluate(xs[i], ys[i])
            if f < best_f[i]:
                best_f[i] = f
                best_x[i], best_y[i] = xs[i], ys[i]
        g = min(range(n), key=lambda i: best_f[i])
        improved = best_f[g] < gf
        gx, gy, gf = best_x[g], best_y[g], best_f[g]
        radius.update(improved)
        history.append(gf)

    return GcpsoResult(Position2D(gx, gy), gf, np.asarray(history))


def _require_psd(cov: np.ndarray) -> np.ndarray:
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (2, 2):
        raise ValueError("covariance must be 2x2")
    if not np.allclose(cov, cov.T, atol=1e-8):
        raise ValueError("covariance must be symmetric")
    if np.linalg.eigvalsh(cov).min() < -1e-9:
        raise ValueError("covariance must be positive semidefinite")
    return cov


def ekf_predict(
    state: Position2D,
    cov: np.ndarray,
    velocity: Velocity2D,
    params: EkfParams,
) -> tuple[Position2D, np.ndarray]:
    """Propagate the position with the measured velocity and inflate the
    covariance by the process and velocity-input noise."""
    cov = _require_psd(cov)
    dt = params.step_seconds
    new_state = Position2D(state.x + dt * velocity.vx, state.y + dt * velocity.vy)
    inflation = params.process_std**2 + (dt * params.velocity_std) ** 2
    return new_state, cov + inflation * np.eye(2)


def ekf_update(
    state: Position2D,
    cov: np.ndarray,
    selected: list[Candidate] | tuple[Candidate, ...],
    params: EkfParams,
) -> tuple[Position2D, np.ndarray]:
    """Joint EKF update over the selected range measurements.

    Each neighbor contributes h_j(x) = ||x - x_j|| with Jacobian row
    (x - x_j)^T / ||x - x_j||; neighbors coincident with the state are
    skipped. The returned covariance is explicitly symmetrized.
    """
    cov = _require_psd(cov)
    rows = []
    innovations = []
    for cand in selected:
        sp = cand.shared_position
        dx, dy = state.x - sp.x, state.y - sp.y
        dist = math.hypot(dx, dy)
        if dist < _COINCIDENT:
            continue
        rows.append((dx / dist, dy / dist))
        innovations.append(cand.range.distance - dist)
    if not rows:
        return state, cov
    jac = np.array(rows)
    innov = np.array(innovations)
    m = len(rows)
    innov_cov = jac @ cov @ jac.T + params.range_std**2 * np.eye(m)
    gain = np.linalg.solve(innov_cov, jac @ cov).T
    delta = gain @ innov
    new_cov = (np.eye(2) - gain @ jac) @ cov
    new_cov = (new_cov + new_cov.T) / 2.0
    return Position2D(state.x + delta[0], state.y + delta[1]), new_cov


def trilaterate(
    anchors: tuple[Position2D, Position2D, Position2D] | list[Position2D],
    ranges: tuple[float, float, float] | list[float],
) -> tuple[Position2D, float]:
    """Closed-form least-squares fix from three non-collinear anchors.

    Subtracting the first circle equation from the others linearizes the
    system; the 2x2 solve is exact. Returns (position, RMS range residual).
    """
    if len(anchors) != 3 or len(ranges) != 3:
        raise ValueError("trilaterate needs exactly 3 anchors and ranges")
    (x1, y1), (x2, y2), (x3, y3) = anchors
    r1, r2, r3 = ranges
    a11, a12 = 2.0 * (x2 - x1), 2.0 * (y2 - y1)
    a21, a22 = 2.0 * (x3 - x1), 2.0 * (y3 - y1)
    det = a11 * a22 - a12 * a21
    scale = math.hypot(x2 - x1, y2 - y1) * math.hypot(x3 - x1, y3 - y1)
    if abs(det) <= 4e-9 * max(scale, 1.0):
        raise DegenerateGeometryError("anchors are collinear")
    b1 = r1 * r1 - r2 * r2 + x2 * x2 - x1 * x1 + y2 * y2 - y1 * y1
    b2 = r1 * r1 - r3 * r3 + x3 * x3 - x1 * x1 + y3 * y3 - y1 * y1
    x = (b1 * a22 - b2 * a12) / det
    y = (a11 * b2 - a21 * b1) / det
    fix = Position2D(x, y)
    residual = math.sqrt(
        sum(
            (r - math.hypot(x - px, y - py)) ** 2
            for (px, py), r in zip(anchors, ranges)
        )
        / 3.0
    )
    return fix, residual


def bilaterate_with_prior(
    a1: Position2D,
    r1: float,
    a2: Position2D,
    r2: float,
    prior: Position2D,
) -> Position2D:
    """Two-anchor fix: of the two circle intersections, the one nearer the
    prior. Tangent or (nearly) disjoint circles yield the midpoint of their
    nearest approach; concentric anchors are an error."""
    dx, dy = a2.x - a1.x, a2.y - a1.y
    d = math.hypot(dx, dy)
    if d <= 1e-9 * max(r1, r2, 1.0):
        raise DegenerateGeometryError("concentric anchor circles")
    ux, uy = dx / d, dy / d
    along = (r1 * r1 - r2 * r2 + d * d) / (2.0 * d)
    h_sq = r1 * r1 - along * along
    if h_sq > 0.0:
        h = math.sqrt(h_sq)
        fx, fy = a1.x + along * ux, a1.y + along * uy
        p_left = Position2D(fx - h * uy, fy + h * ux)
        p_right = Position2D(fx + h * uy, fy - h * ux)
        dl = math.hypot(p_left.x - prior.x, p_left.y - prior.y)
        dr = math.hypot(p_right.x - prior.x, p_right.y - prior.y)
        return p_left if dl <= dr else p_right
    if d >= r1 + r2:  # circles apart: midpoint of the straight-line gap
        mx = (a1.x + r1 * ux + a2.x - r2 * ux) / 2.0
        my = (a1.y + r1 * uy + a2.y - r2 * uy) / 2.0
    elif r1 >= r2:  # second circle inside the first
        mx = (a1.x + r1 * ux + a2.x + r2 * ux) / 2.0
        my = (a1.y + r1 * uy + a2.y + r2 * uy) / 2.0
    else:  # first circle inside the second
        mx = (a1.x - r1 * ux + a2.x - r2 * ux) / 2.0
        my = (a1.y - r1 * uy + a2.y - r2 * uy) / 2.0
    return Position2D(mx, my)
