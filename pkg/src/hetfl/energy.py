"""Per-frame energy accounting for devices and edge servers.

Devices spend circuit, computation, and uplink-transmission energy every
frame and recharge from directed wireless energy transfer beamed by their
edge server.  Edge servers draw circuit, energy-transfer, and backhaul
energy from the grid; the sum of those draws, weighted by a per-frame price,
is the quantity every association policy tries to minimise.
"""

from __future__ import annotations

import numpy as np


class EnergyError(RuntimeError):
    """Raised when an energy quantity is requested outside its domain."""


def compute_energy(varsigma: float, omega: float, vartheta: float, q_bits: float) -> float:
    """Local-training energy: switched-capacitance model over omega cycles/bit."""
    if min(varsigma, omega, vartheta, q_bits) < 0:
        raise ValueError("all computation-energy factors must be non-negative")
    return varsigma * omega * vartheta**2 * q_bits


def access_energy(rate: float, noise_gain: float, q_bits: float, bandwidth: float, sigma2: float) -> float:
    """Uplink transmission energy for ``q_bits`` at a fixed rate under zero forcing.

    Inverts the rate formula for the needed transmit power and multiplies by
    the transmission time ``q_bits / rate``.
    """
    if rate <= 0:
        raise EnergyError("zero-rate transmission undefined")
    if noise_gain < 0 or q_bits < 0 or bandwidth <= 0 or sigma2 < 0:
        raise ValueError("invalid access-energy arguments")
    return sigma2 * q_bits * noise_gain * (2.0 ** (rate / bandwidth) - 1.0) / rate


def device_energy(e_cir: float, e_cmp: float, e_ac: float) -> float:
    """Total energy a device consumes in one frame."""
    if min(e_cir, e_cmp, e_ac) < 0:
        raise ValueError("energy components must be non-negative")
    return e_cir + e_cmp + e_ac


def harvested(e_wet: float, beta: float, xi: float, n_mec: int) -> float:
    """Energy a device captures from its server's energy-transfer beam."""
    if min(e_wet, beta, xi) < 0 or n_mec < 0:
        raise ValueError("harvest factors must be non-negative")
    return e_wet * beta * xi * n_mec


def battery_update(level: float, e_dev: float, a: float, b_max: float) -> float:
    """Next battery level: consume ``e_dev``, harvest ``a``, clip at capacity.

    A deficit below -1e-9 J raises; smaller negative residue is rounding from
    an exactly-covering transfer and is clamped to zero.
    """
    if b_max <= 0:
        raise ValueError("battery capacity must be positive")
    if not 0 <= level <= b_max:
        raise ValueError(f"battery level {level} outside [0, {b_max}]")
    nxt = level - e_dev + a
    if nxt < -1e-9:
        raise EnergyError("battery underflow: infeasible schedule")
    return min(b_max, max(0.0, nxt))


def backhaul_energy(rate: float, gain: float, q_bits: float, bandwidth: float, sigma2: float) -> float:
    """Energy one edge server spends forwarding ``q_bits`` over the backhaul."""
    if rate <= 0:
        raise EnergyError("zero-rate transmission undefined")
    if gain <= 0:
        raise EnergyError("backhaul gain must be positive")
    if q_bits < 0 or bandwidth <= 0 or sigma2 < 0:
        raise ValueError("invalid backhaul-energy arguments")
    return sigma2 * q_bits * (2.0 ** (rate / bandwidth) - 1.0) / (gain * rate)


def mec_energy(e_cir: float, e_wet: float, e_bh: float) -> float:
    """Total grid draw of one edge server in one frame."""
    if min(e_cir, e_wet, e_bh) < 0:
        raise ValueError("energy components must be non-negative")
    return e_cir + e_wet + e_bh


def optimal_wet(requirements: list[tuple[float, float, float]], n_mec: int) -> float:
    """Smallest energy-transfer budget that keeps every device solvent.

    ``requirements`` holds one (e_dev, battery, beta * xi) triple per served
    device.  Each device k harvests ``e_wet * beta_k * xi_k * n_mec``, so the
    binding device is the one maximising (e_dev - battery) / (beta * xi *
    n_mec); devices whose batteries already cover their demand contribute a
    non-positive quotient, and the budget never goes below zero.
    """
    if n_mec <= 0:
        raise ValueError("n_mec must be positive")
    best = 0.0
    for e_dev, battery, beta_xi in requirements:
        if beta_xi <= 0:
            raise EnergyError("device with zero harvest coefficient cannot be recharged")
        best = max(best, (e_dev - battery) / (beta_xi * n_mec))
    return best


class EnergyLedger:
    """Frame-by-frame record of every energy flow in one run.

    Device-side arrays are (L, K): computation, access, total consumption,
    harvested energy, end-of-frame battery, and an active flag.  Server-side
    arrays are (L, M): transfer budget, backhaul energy, total grid draw, and
    the grid price in force.  ``delta`` accumulates the priced grid draw
    incrementally as frames are appended.
    """

    def __init__(self, n_mecs: int, n_devices: int):
        self.n_mecs = n_mecs
        self.n_devices = n_devices
        self._dev_rows: list[np.ndarray] = []  # each (6, K)
        self._mec_rows: list[np.ndarray] = []  # each (4, M)
        self.delta = 0.0

    @property
    def n_frames(self) -> int:
        return len(self._mec_rows)

    def add_frame(
        self,
        e_cmp: np.ndarray,
        e_ac: np.ndarray,
        e_dev: np.ndarray,
        harvest: np.ndarray,
        battery: np.ndarray,
        active: np.ndarray,
        e_wet: np.ndarray,
        e_bh: np.ndarray,
        e_mec: np.ndarray,
        alpha: np.ndarray,
    ) -> None:
        dev = np.vstack([e_cmp, e_ac, e_dev, harvest, battery, active.astype(float)])
        mec = np.vstack([e_wet, e_bh, e_mec, alpha])
        if dev.shape != (6, self.n_devices) or mec.shape != (4, self.n_mecs):
            raise ValueError("ledger frame has wrong width")
        self._dev_rows.append(dev)
        self._mec_rows.append(mec)
        self.delta += float(np.dot(alpha, e_mec))

    def _stack(self, rows, idx):
        if not rows:
            width = self.n_devices if rows is self._dev_rows else self.n_mecs
            return np.zeros((0, width))
        return np.stack([r[idx] for r in rows])

    @property
    def e_cmp(self) -> np.ndarray:
        return self._stack(self._dev_rows, 0)

    @property
    def e_ac(self) -> np.ndarray:
        return self._stack(self._dev_rows, 1)

    @property
    def e_dev(self) -> np.ndarray:
        return self._stack(self._dev_rows, 2)

    @property
    def harvest(self) -> np.ndarray:
        return self._stack(self._dev_rows, 3)

    @property
    def battery(self) -> np.ndarray:
        return self._stack(self._dev_rows, 4)

    @property
    def active(self) -> np.ndarray:
        return self._stack(self._dev_rows, 5).astype(bool)

    @property
    def e_wet(self) -> np.ndarray:
        return self._stack(self._mec_rows, 0)

    @property
    def e_bh(self) -> np.ndarray:
        return self._stack(self._mec_rows, 1)

    @property
    def e_mec(self) -> np.ndarray:
        return self._stack(self._mec_rows, 2)

    @property
    def alpha(self) -> np.ndarray:
        return self._stack(self._mec_rows, 3)

    def device_rows(self):
        """CSV rows (frame, device_id, E_cmp, E_ac, E_dev, A, battery)."""
        for l, dev in enumerate(self._dev_rows, start=1):
            for k in range(self.n_devices):
                yield (l, k, dev[0, k], dev[1, k], dev[2, k], dev[3, k], dev[4, k])

    def mec_rows(self):
        """CSV rows (frame, mec_id, E_wet, E_bh, E_mec, alpha)."""
        for l, mec in enumerate(self._mec_rows, start=1):
            for m in range(self.n_mecs):
                yield (l, m, mec[0, m], mec[1, m], mec[2, m], mec[3, m])


def grid_cost(ledger: EnergyLedger) -> float:
    """Priced total grid draw, recomputed from the stored per-frame arrays."""
    if ledger.n_frames == 0:
        return 0.0
    return float(np.sum(ledger.alpha * ledger.e_mec))
