"""Network geometry, distance-based channel gain, micro-cells, and device mobility.

The layout is a single macro-cell disk: the central unit sits at the origin,
edge servers and devices are dropped uniformly over the disk.  Devices may
move between frames following a three-state hidden Markov walk (static /
normal / risky) with Gamma-distributed step lengths and Von Mises turning
angles.  The disk is tiled by a square micro-cell grid; association refreshes
are triggered by micro-cell crossings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

# One walking step corresponds to 0.7 m of displacement; 84 steps per minute
# is the boundary between a normal walker and a risky (fast) one.
STEP_LENGTH_M = 0.7
STEP_RATE_THRESHOLD = 84.0
SPEED_THRESHOLD = STEP_RATE_THRESHOLD * STEP_LENGTH_M / 60.0  # 0.98 m/s


class MobilityClass(IntEnum):
    STATIC = 0
    NORMAL = 1
    RISKY = 2


# Uniform speed ranges per hidden state (m/s).  Normal walkers stay strictly
# below the step-rate threshold, risky walkers strictly above; the range
# midpoints (0.5 and 1.5 m/s) are the representative speeds used when sizing
# re-association periods.
SPEED_RANGES = {
    MobilityClass.STATIC: (0.0, 0.0),
    MobilityClass.NORMAL: (0.02, SPEED_THRESHOLD),
    MobilityClass.RISKY: (SPEED_THRESHOLD, SPEED_THRESHOLD + 1.04),
}

# Von Mises concentration of the turning angle per hidden state: normal
# walkers mostly keep direction, risky walkers turn erratically.
TURN_KAPPA = {
    MobilityClass.STATIC: 0.0,
    MobilityClass.NORMAL: 4.0,
    MobilityClass.RISKY: 0.5,
}


def default_transitions(p_stay: float = 0.8) -> np.ndarray:
    """Row-stochastic 3x3 transition matrix with uniform leak off the diagonal."""
    if not 0.0 <= p_stay <= 1.0:
        raise ValueError(f"p_stay must lie in [0, 1], got {p_stay}")
    leak = (1.0 - p_stay) / 2.0
    out = np.full((3, 3), leak)
    np.fill_diagonal(out, p_stay)
    return out


@dataclass(frozen=True)
class Position:
    x: float
    y: float

    def distance_to(self, other: "Position") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


def place_uniform(n: int, radius: float, rng: np.random.Generator) -> list[Position]:
    """Drop ``n`` points uniformly over the disk of the given radius.

    Sampling the radial coordinate as ``radius * sqrt(U)`` makes the density
    uniform in area rather than in radius.
    """
    if n < 0:
        raise ValueError(f"n must be non-negative, got {n}")
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    r = radius * np.sqrt(rng.uniform(size=n))
    phi = rng.uniform(0.0, 2.0 * math.pi, size=n)
    return [Position(float(ri * math.cos(pi)), float(ri * math.sin(pi))) for ri, pi in zip(r, phi)]


def pathloss_gain(distance: float, nu: float, d0: float = 1.0) -> float:
    """Distance-based power gain ``(max(d, d0)/d0)**(-nu)``.

    Distances below the reference ``d0`` saturate at gain 1 so that the gain
    never exceeds unity and never diverges at zero distance.
    """
    if distance < 0:
        raise ValueError(f"distance must be non-negative, got {distance}")
    if d0 <= 0:
        raise ValueError(f"d0 must be positive, got {d0}")
    return (max(distance, d0) / d0) ** (-nu)


def gain_matrix(mecs: list[Position], devices: list[Position], nu: float, d0: float = 1.0) -> np.ndarray:
    """(M, K) matrix of pathloss gains between every edge server and device."""
    out = np.empty((len(mecs), len(devices)))
    for i, mp in enumerate(mecs):
        for j, dp in enumerate(devices):
            out[i, j] = pathloss_gain(mp.distance_to(dp), nu, d0)
    return out


@dataclass(frozen=True)
class MicroCellGrid:
    """Square tiling of the plane with cell side ``mu``, anchored at ``origin``."""

    mu: float
    origin: Position = Position(0.0, 0.0)

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError(f"micro-cell side must be positive, got {self.mu}")


def micro_cell_of(p: Position, grid: MicroCellGrid) -> tuple[int, int]:
    """Integer (column, row) index of the micro-cell containing ``p``."""
    return (
        math.floor((p.x - grid.origin.x) / grid.mu),
        math.floor((p.y - grid.origin.y) / grid.mu),
    )


def frames_per_cell(mu: float, frame_duration: float, speed: float) -> float:
    """Number of whole frames a walker at ``speed`` needs to cross one micro-cell.

    Returns ``math.inf`` for zero speed (a static device never crosses).
    """
    if mu <= 0 or frame_duration <= 0:
        raise ValueError("mu and frame_duration must be positive")
    if speed < 0:
        raise ValueError(f"speed must be non-negative, got {speed}")
    if speed == 0.0:
        return math.inf
    return float(max(1, math.ceil(mu / (frame_duration * speed))))


@dataclass(frozen=True)
class MobilityState:
    """Hidden class plus kinematic state of one walker."""

    state: MobilityClass
    heading: float
    speed: float


def _sample_speed(state: MobilityClass, rng: np.random.Generator) -> float:
    lo, hi = SPEED_RANGES[state]
    if hi <= lo:
        return lo
    return float(rng.uniform(lo, hi))


def hmm_step(
    s: MobilityState,
    transitions: np.ndarray,
    rng: np.random.Generator,
    turn_kappa: dict | None = None,
) -> MobilityState:
    """Advance the hidden Markov state one frame.

    Samples the next hidden class from the row of ``transitions`` indexed by
    the current class, draws a fresh speed inside the class's range, and turns
    the heading by a Von Mises angle (static walkers keep their heading).
    """
    transitions = np.asarray(transitions, dtype=float)
    if transitions.shape != (3, 3) or np.any(transitions < 0):
        raise ValueError("transitions must be a non-negative 3x3 matrix")
    if np.max(np.abs(transitions.sum(axis=1) - 1.0)) > 1e-9:
        raise ValueError("transition rows must sum to 1")
    kappa = TURN_KAPPA if turn_kappa is None else turn_kappa
    nxt = MobilityClass(int(rng.choice(3, p=transitions[int(s.state)])))
    heading = s.heading
    if nxt != MobilityClass.STATIC:
        heading = float((heading + rng.vonmises(0.0, max(kappa[nxt], 1e-12))) % (2.0 * math.pi))
    return MobilityState(nxt, heading, _sample_speed(nxt, rng))


def sample_displacement(
    s: MobilityState,
    gamma_shape: float,
    gamma_scale: float,
    kappa: float,
    rng: np.random.Generator,
) -> tuple[float, float]:
    """One frame of planar displacement for a walker in state ``s``.

    Step length is Gamma(shape, scale) distributed, direction is the current
    heading perturbed by a Von Mises turning angle.  Static walkers do not
    move.
    """
    if gamma_shape <= 0 or gamma_scale < 0:
        raise ValueError("gamma_shape must be positive and gamma_scale non-negative")
    if s.state == MobilityClass.STATIC:
        return (0.0, 0.0)
    step = float(rng.gamma(gamma_shape, gamma_scale))
    angle = s.heading + float(rng.vonmises(0.0, max(kappa, 1e-12)))
    return (step * math.cos(angle), step * math.sin(angle))


def _reflect_into_disk(old: Position, new: Position, radius: float) -> Position:
    """Fold a point that left the disk back inside along the same ray."""
    r = math.hypot(new.x, new.y)
    if r <= radius or r == 0.0:
        return new
    scale = (2.0 * radius - r) / r
    return Position(new.x * scale, new.y * scale)


@dataclass
class MobilityTrace:
    """Per-frame kinematics of every device.

    ``positions[l][k]`` is the position of device ``k`` after the step taken
    at frame ``l`` (1-based frames; index 0 holds the initial drop).
    """

    positions: list[list[Position]]
    states: np.ndarray  # (L + 1, K) int
    speeds: np.ndarray  # (L + 1, K) float

    @property
    def n_frames(self) -> int:
        return len(self.positions) - 1

    def csv_rows(self):
        """Rows (frame, device_id, x, y, state, speed) for frames 1..L."""
        for l in range(1, len(self.positions)):
            for k, p in enumerate(self.positions[l]):
                yield (
                    l,
                    k,
                    p.x,
                    p.y,
                    MobilityClass(int(self.states[l, k])).name.lower(),
                    float(self.speeds[l, k]),
                )


def simulate_trace(
    initial: list[Position],
    n_frames: int,
    frame_duration: float,
    radius: float,
    transitions: np.ndarray,
    rng: np.random.Generator,
    gamma_shape: float = 2.0,
    turn_kappa: dict | None = None,
) -> MobilityTrace:
    """Walk every device for ``n_frames`` frames inside the macro-cell disk.

    The walk composes the hidden Markov update with a Gamma step whose mean
    equals speed x frame duration; the boundary reflects.  The realised
    heading after a move is the direction actually travelled, which keeps
    headings consistent across reflections.
    """
    if n_frames < 0:
        raise ValueError("n_frames must be non-negative")
    kappa = TURN_KAPPA if turn_kappa is None else turn_kappa
    k_dev = len(initial)
    states = [
        MobilityState(MobilityClass(int(rng.integers(3))), float(rng.uniform(0, 2 * math.pi)), 0.0)
        for _ in range(k_dev)
    ]
    states = [MobilityState(s.state, s.heading, _sample_speed(s.state, rng)) for s in states]

    positions = [list(initial)]
    state_log = np.zeros((n_frames + 1, k_dev), dtype=int)
    speed_log = np.zeros((n_frames + 1, k_dev))
    for k, s in enumerate(states):
        state_log[0, k] = int(s.state)
        speed_log[0, k] = s.speed

    for l in range(1, n_frames + 1):
        row = []
        for k in range(k_dev):
            s = hmm_step(states[k], transitions, rng, turn_kappa=kappa)
            old = positions[l - 1][k]
            if s.state == MobilityClass.STATIC or s.speed == 0.0:
                new = old
            else:
                mean_step = s.speed * frame_duration
                dx, dy = sample_displacement(s, gamma_shape, mean_step / gamma_shape, kappa[s.state], rng)
                new = _reflect_into_disk(old, Position(old.x + dx, old.y + dy), radius)
                moved_x, moved_y = new.x - old.x, new.y - old.y
                if moved_x != 0.0 or moved_y != 0.0:
                    s = MobilityState(s.state, math.atan2(moved_y, moved_x) % (2 * math.pi), s.speed)
            states[k] = s
            row.append(new)
            state_log[l, k] = int(s.state)
            speed_log[l, k] = s.speed
        positions.append(row)
    return MobilityTrace(positions, state_log, speed_log)
