"""Device-to-server association, scheduling, and the per-frame energy rollout.

Grouping devices under edge servers trades two costs against each other: the
statistical skew of each server's pooled training data (measured by a
weighted L1 divergence against the global class distribution) and the grid
energy the servers spend recharging distant devices.  Three policies are
provided: exhaustive search over every assignment (exact, tiny instances
only), a greedy range-and-divergence heuristic that runs in time linear in
the device count, and a uniform random baseline.  A scheduling pass can
additionally deactivate expensive devices frame by frame as long as the
divergence of the remaining active pool stays within budget, and a mobility
hook re-associates devices that crossed micro-cells.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import zf_decode
from .energy import EnergyError, EnergyLedger

BFS_BUDGET = 10**7


class InfeasibleError(RuntimeError):
    """Raised when no assignment satisfies the divergence constraint."""


@dataclass
class DataSplit:
    """Class-by-device sample counts of the federation, shape (C, K)."""

    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts)
        if self.counts.ndim != 2:
            raise ValueError("counts must be a (classes, devices) matrix")
        if np.any(self.counts < 0) or not np.issubdtype(self.counts.dtype, np.integer):
            raise ValueError("counts must be non-negative integers")
        if np.any(self.counts.sum(axis=0) == 0):
            raise ValueError("every device must hold at least one sample")

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def n_devices(self) -> int:
        return self.counts.shape[1]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def global_p(self) -> np.ndarray:
        """Class distribution of the union of all local datasets."""
        return self.counts.sum(axis=1) / self.total


@dataclass
class Association:
    """Binary device-to-server incidence matrix chi of shape (M, K).

    Every column sums to exactly 1: each device reports to one server.
    """

    chi: np.ndarray

    def __post_init__(self):
        self.chi = np.asarray(self.chi)
        if self.chi.ndim != 2 or np.any((self.chi != 0) & (self.chi != 1)):
            raise ValueError("chi must be a binary matrix")
        if np.any(self.chi.sum(axis=0) != 1):
            raise ValueError("each device must be associated with exactly one server")

    @classmethod
    def from_assignment(cls, assignment: np.ndarray, n_mecs: int) -> "Association":
        assignment = np.asarray(assignment, dtype=int)
        if np.any(assignment < 0) or np.any(assignment >= n_mecs):
            raise ValueError("assignment indices out of range")
        chi = np.zeros((n_mecs, assignment.size), dtype=np.int8)
        chi[assignment, np.arange(assignment.size)] = 1
        return cls(chi)

    @property
    def n_mecs(self) -> int:
        return self.chi.shape[0]

    @property
    def n_devices(self) -> int:
        return self.chi.shape[1]

    @property
    def assignment(self) -> np.ndarray:
        """Server index of every device, shape (K,)."""
        return np.argmax(self.chi, axis=0)

    def members(self, m: int) -> np.ndarray:
        return np.nonzero(self.chi[m])[0]

    def groups(self) -> list[np.ndarray]:
        return [self.members(m) for m in range(self.n_mecs)]


def divergence(split: DataSplit, assoc: Association, active: np.ndarray | None = None) -> float:
    """Weighted L1 gap between each server's pooled class mix and the global one.

    With an ``active`` mask, the reference distribution, the weights, and the
    per-server pools are all restricted to the active devices; servers with no
    active device contribute nothing.  The value lies in [0, 2].
    """
    if active is None:
        included = np.arange(split.n_devices)
    else:
        included = np.nonzero(np.asarray(active, dtype=bool))[0]
    if included.size == 0:
        return 0.0
    pooled = split.counts[:, included].sum(axis=1)
    n = pooled.sum()
    p = pooled / n
    theta = 0.0
    member_of = assoc.assignment
    for m in range(assoc.n_mecs):
        devs = included[member_of[included] == m]
        if devs.size == 0:
            continue
        cm = split.counts[:, devs].sum(axis=1)
        nm = cm.sum()
        theta += (nm / n) * float(np.abs(p - cm / nm).sum())
    return theta


class _DivergenceTracker:
    """Incremental evaluator of the association divergence during greedy passes.

    Holds per-server class-count vectors; probing a candidate placement costs
    O(C + M) instead of a full recount.  The reference distribution and the
    weight denominator are those of the complete federation, so devices not
    yet placed simply contribute no term.
    """

    def __init__(self, split: DataSplit, n_mecs: int):
        self.p = split.global_p
        self.n_all = float(split.total)
        self.counts = np.zeros((n_mecs, split.n_classes))
        self.tot = np.zeros(n_mecs)
        self.gap = np.zeros(n_mecs)
        self.wsum = 0.0
        self._p_l1 = float(np.abs(self.p).sum())

    def _term(self, m: int) -> float:
        return (self.tot[m] / self.n_all) * self.gap[m]

    def candidate_theta(self, dev_counts: np.ndarray, m: int) -> float:
        new_tot = self.tot[m] + dev_counts.sum()
        new_gap = float(np.abs(self.p - (self.counts[m] + dev_counts) / new_tot).sum())
        return self.wsum - self._term(m) + (new_tot / self.n_all) * new_gap

    def assign(self, dev_counts: np.ndarray, m: int) -> None:
        self.wsum -= self._term(m)
        self.counts[m] += dev_counts
        self.tot[m] += dev_counts.sum()
        self.gap[m] = float(np.abs(self.p - self.counts[m] / self.tot[m]).sum())
        self.wsum += self._term(m)

    def remove(self, dev_counts: np.ndarray, m: int) -> None:
        self.wsum -= self._term(m)
        self.counts[m] -= dev_counts
        self.tot[m] -= dev_counts.sum()
        self.gap[m] = float(np.abs(self.p - self.counts[m] / self.tot[m]).sum()) if self.tot[m] > 0 else 0.0
        self.wsum += self._term(m)

    @property
    def theta(self) -> float:
        return self.wsum


def _place_device(
    k: int,
    split: DataSplit,
    gains: np.ndarray,
    ranges: np.ndarray,
    tracker: _DivergenceTracker,
    theta_max: float,
    loads: np.ndarray | None = None,
    capacity: int | None = None,
) -> int:
    """Greedy placement rule for one device: best in-range server by divergence.

    A server is in range when the device's gain is at least the weakest gain
    among the server's current members.  If no in-range server keeps the
    divergence within ``theta_max`` (improving on earlier candidates, lowest
    index winning ties), the device falls back to its strongest server, whose
    range is stretched to cover it.  Servers already holding ``capacity``
    devices are skipped entirely — a server cannot spatially separate more
    devices than it has antennas.
    """
    n_mecs = gains.shape[0]
    dev_counts = split.counts[:, k]

    def full(m: int) -> bool:
        return capacity is not None and loads is not None and loads[m] >= capacity

    best = -1
    theta_min = theta_max
    for m in range(n_mecs):
        if gains[m, k] >= ranges[m] and not full(m):
            th = tracker.candidate_theta(dev_counts, m)
            if th < theta_min or (th <= theta_min and best == -1):
                best = m
                theta_min = th
    if best == -1:
        open_servers = [m for m in range(n_mecs) if not full(m)]
        if not open_servers:
            raise InfeasibleError(f"every server already holds {capacity} devices")
        best = open_servers[int(np.argmax(gains[open_servers, k]))]
        ranges[best] = min(ranges[best], gains[best, k])
    tracker.assign(dev_counts, best)
    if loads is not None:
        loads[best] += 1
    return best


def h2rma_associate(
    split: DataSplit,
    gains: np.ndarray,
    theta_max: float,
    capacity: int | None = None,
) -> Association:
    """Greedy range-and-divergence association, linear in the device count.

    Devices are placed in index order.  Ranges start empty (no device is in
    range of a server until one has been pushed onto it by the fallback), so
    the first device per server is always its strongest one.
    """
    gains = np.asarray(gains, dtype=float)
    n_mecs, n_devices = gains.shape
    if n_devices != split.n_devices:
        raise ValueError("gains and split disagree on the device count")
    tracker = _DivergenceTracker(split, n_mecs)
    ranges = np.full(n_mecs, np.inf)
    loads = np.zeros(n_mecs, dtype=int)
    assignment = np.empty(n_devices, dtype=int)
    for k in range(n_devices):
        assignment[k] = _place_device(k, split, gains, ranges, tracker, theta_max, loads, capacity)
    return Association.from_assignment(assignment, n_mecs)


def random_associate(
    n_devices: int,
    n_mecs: int,
    rng: np.random.Generator,
    capacity: int | None = None,
) -> Association:
    """Uniform random baseline: each device picks a server independently.

    With a ``capacity``, draws are rejected until no server exceeds it, which
    leaves the distribution uniform over the servable assignments.
    """
    if n_mecs <= 0 or n_devices < 0:
        raise ValueError("need at least one server and a non-negative device count")
    if capacity is not None and n_devices > n_mecs * capacity:
        raise InfeasibleError(f"{n_devices} devices cannot fit {n_mecs} servers of capacity {capacity}")
    for _ in range(1000):
        assignment = rng.integers(0, n_mecs, size=n_devices)
        if capacity is None or np.bincount(assignment, minlength=n_mecs).max() <= capacity:
            return Association.from_assignment(assignment, n_mecs)
    raise InfeasibleError("could not draw a capacity-respecting assignment")


@dataclass
class WetPlan:
    """Energy-transfer schedule: budget per (frame, server) and beam shares.

    ``xi[m, k]`` is device k's share of server m's beam (uniform over the
    server's members, zero elsewhere); each non-empty server's row sums to 1.
    """

    e_wet: np.ndarray
    xi: np.ndarray


@dataclass
class EnergyScenario:
    """Frozen inputs of an energy rollout: geometry, channels, prices, batteries.

    ``betas`` is (M, K) for a static drop or (L, M, K) under mobility;
    ``fading`` is the unit-variance access fading tensor (L, M, n_antennas, K)
    or None to model ideal unit noise gains (used for complexity probes);
    ``bd`` holds the per-frame filtered backhaul power (L, M).  With
    ``frozen`` set, every accessor serves frame 0, which makes rollouts for
    different assignments exactly comparable.
    """

    n_frames: int
    sigma2: float
    bandwidth: float
    q_bits: float
    r_dev: float
    r_mec: float
    e_cir_dev: float
    e_cir_mec: float
    e_cmp: float
    n_mec_antennas: int
    b_max: float
    b0: np.ndarray
    betas: np.ndarray
    bd: np.ndarray
    fading: np.ndarray | None = None
    alpha: np.ndarray | float = 1.0
    frozen: bool = False
    _zf_cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_mecs(self) -> int:
        return self.bd.shape[1]

    @property
    def n_devices(self) -> int:
        return self.b0.size

    @property
    def ac_factor(self) -> float:
        """Access energy per unit of zero-forcing noise gain."""
        return self.sigma2 * self.q_bits * (2.0 ** (self.r_dev / self.bandwidth) - 1.0) / self.r_dev

    @property
    def bh_factor(self) -> float:
        """Backhaul energy times the filtered channel power."""
        return self.sigma2 * self.q_bits * (2.0 ** (self.r_mec / self.bandwidth) - 1.0) / self.r_mec

    def _frame(self, l: int) -> int:
        return 0 if self.frozen else l

    def betas_at(self, l: int) -> np.ndarray:
        return self.betas if self.betas.ndim == 2 else self.betas[self._frame(l)]

    def bd_at(self, l: int) -> np.ndarray:
        return self.bd[self._frame(l)]

    def alpha_at(self, l: int) -> np.ndarray:
        if np.isscalar(self.alpha):
            return np.full(self.n_mecs, float(self.alpha))
        return np.asarray(self.alpha)[self._frame(l)]

    def noise_gains(self, l: int, m: int, devs: np.ndarray) -> np.ndarray:
        """Zero-forcing noise amplification for the given devices on server m."""
        if self.fading is None:
            return np.ones(len(devs))
        li = self._frame(l)
        key = (m, tuple(int(d) for d in devs)) if self.frozen else None
        if key is not None and key in self._zf_cache:
            return self._zf_cache[key]
        g = self.fading[li, m][:, devs] * np.sqrt(self.betas_at(l)[m, devs])[None, :]
        gains = zf_decode(g).noise_gain
        if key is not None:
            self._zf_cache[key] = gains
        return gains


def frame_energy_step(
    l: int,
    groups: list[np.ndarray],
    active: np.ndarray,
    batteries: np.ndarray,
    scenario: EnergyScenario,
) -> dict:
    """Advance batteries one frame and return every energy flow of that frame.

    Per server: zero-forcing access energies of its active members, the
    minimal energy-transfer budget that keeps each of them solvent (the
    binding member ends the frame empty), harvesting with beam shares uniform
    over the server's members, then the backhaul spend.  Inactive devices
    neither consume nor harvest; servers with no active member spend only
    circuit energy.
    """
    n_devices = batteries.size
    n_mecs = len(groups)
    e_cmp = np.zeros(n_devices)
    e_ac = np.zeros(n_devices)
    e_dev = np.zeros(n_devices)
    harvest = np.zeros(n_devices)
    e_wet = np.zeros(n_mecs)
    e_bh = np.zeros(n_mecs)
    e_mec = np.full(n_mecs, scenario.e_cir_mec)
    betas_l = scenario.betas_at(l)
    bd_l = scenario.bd_at(l)
    for m, devs in enumerate(groups):
        act = devs[active[devs]] if devs.size else devs
        if act.size == 0:
            continue
        e_ac[act] = scenario.ac_factor * scenario.noise_gains(l, m, act)
        e_cmp[act] = scenario.e_cmp
        e_dev[act] = scenario.e_cir_dev + e_cmp[act] + e_ac[act]
        beam = betas_l[m, act] * (1.0 / devs.size) * scenario.n_mec_antennas
        if np.any(beam <= 0):
            raise EnergyError("device with zero harvest coefficient cannot be recharged")
        e_wet[m] = max(0.0, float(np.max((e_dev[act] - batteries[act]) / beam)))
        harvest[act] = e_wet[m] * beam
        nxt = batteries[act] - e_dev[act] + harvest[act]
        if np.any(nxt < -1e-9):
            raise EnergyError("battery underflow: infeasible schedule")
        batteries[act] = np.minimum(scenario.b_max, np.maximum(nxt, 0.0))
        if bd_l[m] <= 0:
            raise EnergyError("backhaul gain must be positive")
        e_bh[m] = scenario.bh_factor / bd_l[m]
        e_mec[m] += e_wet[m] + e_bh[m]
    return {
        "e_cmp": e_cmp,
        "e_ac": e_ac,
        "e_dev": e_dev,
        "harvest": harvest,
        "e_wet": e_wet,
        "e_bh": e_bh,
        "e_mec": e_mec,
        "alpha": scenario.alpha_at(l),
    }


def run_frames(
    assoc: Association,
    scenario: EnergyScenario,
    n_frames: int | None = None,
    with_ledger: bool = True,
) -> tuple[WetPlan | None, EnergyLedger | None, float]:
    """Roll the all-active energy loop for a fixed association.

    Returns the transfer plan, the ledger (both None when ``with_ledger`` is
    off), and the priced grid cost.
    """
    if n_frames is None:
        n_frames = scenario.n_frames
    groups = assoc.groups()
    batteries = scenario.b0.astype(float).copy()
    active = np.ones(assoc.n_devices, dtype=bool)
    ledger = EnergyLedger(assoc.n_mecs, assoc.n_devices) if with_ledger else None
    e_wet_log = np.zeros((n_frames, assoc.n_mecs)) if with_ledger else None
    delta = 0.0
    for l in range(n_frames):
        frame = frame_energy_step(l, groups, active, batteries, scenario)
        delta += float(np.dot(frame["alpha"], frame["e_mec"]))
        if with_ledger:
            e_wet_log[l] = frame["e_wet"]
            ledger.add_frame(
                frame["e_cmp"], frame["e_ac"], frame["e_dev"], frame["harvest"],
                batteries.copy(), active, frame["e_wet"], frame["e_bh"],
                frame["e_mec"], frame["alpha"],
            )
    if not with_ledger:
        return None, None, delta
    xi = np.zeros((assoc.n_mecs, assoc.n_devices))
    for m, devs in enumerate(groups):
        if devs.size:
            xi[m, devs] = 1.0 / devs.size
    return WetPlan(e_wet_log, xi), ledger, delta


def _theta_of_counts(counts: np.ndarray, tot: np.ndarray, p: np.ndarray, n_all: float) -> float:
    occupied = tot > 0
    if not np.any(occupied):
        return 0.0
    mixes = counts[occupied] / tot[occupied, None]
    return float(np.dot(tot[occupied] / n_all, np.abs(p[None, :] - mixes).sum(axis=1)))


def bfs_optimal(
    split: DataSplit,
    gains: np.ndarray,
    scenario: EnergyScenario,
    theta_max: float,
    capacity: int | None = None,
) -> tuple[Association, float]:
    """Exhaustive minimiser of the priced grid cost under the divergence cap.

    Enumerates all M^K assignments (refusing instances past the budget),
    filters by divergence and per-server capacity, rolls the frozen energy
    loop for the survivors, and returns the cheapest assignment; among cost
    ties the lexicographically smallest assignment wins because enumeration is
    lexicographic and only strict improvements replace the incumbent.
    """
    gains = np.asarray(gains, dtype=float)
    n_mecs, n_devices = gains.shape
    if n_mecs**n_devices > BFS_BUDGET:
        raise ValueError("instance too large for BFS")
    n_frames = scenario.n_frames
    p = split.global_p
    n_all = float(split.total)
    s_t = split.counts.T  # (K, C)
    best_cost = math.inf
    best_assignment = None
    for cand in itertools.product(range(n_mecs), repeat=n_devices):
        if capacity is not None and np.bincount(cand, minlength=n_mecs).max() > capacity:
            continue
        counts = np.zeros((n_mecs, split.n_classes))
        np.add.at(counts, list(cand), s_t)
        tot = counts.sum(axis=1)
        if _theta_of_counts(counts, tot, p, n_all) > theta_max:
            continue
        assoc = Association.from_assignment(np.array(cand), n_mecs)
        _, _, cost = run_frames(assoc, scenario, n_frames, with_ledger=False)
        if cost < best_cost:
            best_cost = cost
            best_assignment = cand
    if best_assignment is None:
        raise InfeasibleError("theta_max too tight: no assignment satisfies the divergence cap")
    return Association.from_assignment(np.array(best_assignment), n_mecs), best_cost


def schedule_devices(
    e_ac: np.ndarray,
    e_th: float,
    split: DataSplit,
    assoc: Association,
    theta_max: float,
) -> np.ndarray:
    """Deactivate expensive devices while the active pool stays representative.

    Candidates are the devices whose access energy exceeds ``e_th``, visited
    in decreasing energy order (lowest index first on ties); each is switched
    off only if the divergence of the remaining active pool stays within
    ``theta_max``.  Returns the boolean active mask.
    """
    e_ac = np.asarray(e_ac, dtype=float)
    active = np.ones(e_ac.size, dtype=bool)
    candidates = sorted((k for k in range(e_ac.size) if e_ac[k] > e_th), key=lambda k: (-e_ac[k], k))
    for k in candidates:
        active[k] = False
        if divergence(split, assoc, active) > theta_max:
            active[k] = True
    return active


def dhda_trigger(frame: int, psi_nml: float, psi_rsk: float) -> bool:
    """True on frames where either walker class is due a re-association check."""
    if frame <= 0:
        return False
    for psi in (psi_nml, psi_rsk):
        if not math.isinf(psi) and frame % int(psi) == 0:
            return True
    return False


def initial_ranges(assoc: Association, gains: np.ndarray) -> np.ndarray:
    """Range of each server at drop time: the gain of its farthest member.

    Servers with no members keep the empty-range sentinel.  For a greedy
    association this reproduces the ranges the placement loop left behind,
    since in-range placements never move a range and fallbacks set it to the
    new farthest member.
    """
    gains = np.asarray(gains, dtype=float)
    return np.array(
        [
            min((gains[m, k] for k in np.nonzero(assoc.chi[m])[0]), default=np.inf)
            for m in range(assoc.n_mecs)
        ]
    )


def dhda_update(
    assoc: Association,
    ranges: np.ndarray,
    split: DataSplit,
    gains: np.ndarray,
    moved: list[int],
    theta_max: float,
    capacity: int | None = None,
) -> Association:
    """Re-associate the given devices against the current gains.

    Callers decide who moved (walkers due a check that crossed a micro-cell
    since their last one).  Each is pulled out and re-placed by the same
    greedy rule used for the initial association.  ``ranges`` carries the
    servers' energy-free coverage across checks; it is widened in place
    whenever a fallback pushes a device onto its closest server, and never
    shrinks (a beam that once covered a radius keeps doing so).  Devices not
    listed keep their server.
    """
    if not moved:
        return assoc
    gains = np.asarray(gains, dtype=float)
    assignment = assoc.assignment.copy()
    loads = np.bincount(assignment, minlength=assoc.n_mecs)
    tracker = _DivergenceTracker(split, assoc.n_mecs)
    for k in range(assoc.n_devices):
        tracker.assign(split.counts[:, k], assignment[k])
    for k in moved:
        tracker.remove(split.counts[:, k], assignment[k])
        loads[assignment[k]] -= 1
        assignment[k] = _place_device(k, split, gains, ranges, tracker, theta_max, loads, capacity)
    return Association.from_assignment(assignment, assoc.n_mecs)


def h2rma_run(cfg) -> tuple[Association, WetPlan, EnergyLedger]:
    """Greedy association followed by the full energy rollout for one scenario.

    Convenience entry point mirroring the heuristic end to end: build the
    static scenario a config describes, associate, and roll all frames with
    the per-frame optimal transfer budgets.
    """
    from .sim import build_static_scenario  # deferred: sim composes this module

    split, gains, scenario = build_static_scenario(cfg)
    assoc = h2rma_associate(split, gains, cfg.theta_max)
    wet, ledger, _ = run_frames(assoc, scenario, cfg.L)
    return assoc, wet, ledger
