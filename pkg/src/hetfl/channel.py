"""Wireless channel sampling, multi-antenna decoders, and achievable rates.

Two links are modelled.  The access link from a device to its edge server is
Rayleigh-faded and decoded with zero forcing across the devices sharing that
server.  The backhaul link from each edge server array to the central unit's
large array is Rician; the central unit separates the servers with a
block-diagonalization receive filter built from null spaces, so each server's
stream sees zero interference from the others.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Relative singular-value cutoff used when ranking matrix ranks.
_RANK_RTOL = 1e-10
# Condition-number ceiling beyond which zero forcing is refused.
_ZF_COND_LIMIT = 1e12


class ChannelError(RuntimeError):
    """Raised when a decoder cannot be built for the drawn channel."""


def sample_access(betas: np.ndarray, n_mec: int, rng: np.random.Generator) -> np.ndarray:
    """Draw one access-channel matrix G of shape (n_mec, K).

    Column k is sqrt(betas[k]) times a circularly-symmetric unit-variance
    complex Gaussian vector, so E|G[i, k]|^2 == betas[k].
    """
    betas = np.asarray(betas, dtype=float)
    if betas.ndim != 1:
        raise ValueError("betas must be a 1-D array of per-device gains")
    if np.any(betas < 0):
        raise ValueError("betas must be non-negative")
    k = betas.size
    if k > n_mec:
        raise ChannelError(f"ZF infeasible: {k} devices exceed {n_mec} antennas")
    fading = (rng.standard_normal((n_mec, k)) + 1j * rng.standard_normal((n_mec, k))) / np.sqrt(2.0)
    return fading * np.sqrt(betas)[None, :]


def sample_rician(rows: int, cols: int, k_factor: float, rng: np.random.Generator) -> np.ndarray:
    """Draw a Rician matrix with unit per-entry second moment.

    The line-of-sight component is the rank-one all-ones matrix (unit modulus,
    common phase); ``k_factor`` is the linear power ratio between it and the
    scattered part.
    """
    if rows <= 0 or cols <= 0:
        raise ValueError("rows and cols must be positive")
    if k_factor < 0:
        raise ValueError(f"k_factor must be non-negative, got {k_factor}")
    los = np.ones((rows, cols), dtype=complex)
    nlos = (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2.0)
    return np.sqrt(k_factor / (k_factor + 1.0)) * los + np.sqrt(1.0 / (k_factor + 1.0)) * nlos


@dataclass
class ZfDecoder:
    """Zero-forcing receive filter Z = G (G^H G)^-1 and its noise amplification.

    ``noise_gain[k]`` is the k-th diagonal entry of (G^H G)^-1: the factor by
    which the receiver noise floor is scaled on device k's stream.
    """

    matrix: np.ndarray
    noise_gain: np.ndarray


def zf_decode(g: np.ndarray) -> ZfDecoder:
    """Build the zero-forcing decoder for an access matrix G (antennas x devices)."""
    g = np.asarray(g, dtype=complex)
    if g.ndim != 2:
        raise ValueError("G must be a matrix")
    n, k = g.shape
    if k == 0:
        return ZfDecoder(np.zeros((n, 0), dtype=complex), np.zeros(0))
    if k > n:
        raise ChannelError(f"ZF infeasible: {k} devices exceed {n} antennas")
    sv = np.linalg.svd(g, compute_uv=False)
    if sv[-1] <= 0 or sv[0] / sv[-1] >= _ZF_COND_LIMIT:
        raise ChannelError("ZF infeasible: resample channel")
    gram_inv = np.linalg.inv(g.conj().T @ g)
    return ZfDecoder(g @ gram_inv, np.real(np.diag(gram_inv)).copy())


@dataclass
class BdDecoder:
    """Block-diagonalization filter for one edge server's backhaul stream.

    ``matrix`` has orthonormal columns lying in the common null space of every
    other server's channel; ``gain`` is the squared Frobenius norm of the
    server's own channel after filtering.
    """

    matrix: np.ndarray
    gain: float


def bd_decode(channels: list[np.ndarray], m: int) -> BdDecoder:
    """Build the interference-nulling filter for server ``m``.

    ``channels[j]`` is server j's matrix with the central-unit antennas along
    the columns (shape n_mec x n_cu).  The filter is V0 @ V1 where V0 spans
    the null space of the other servers' stacked channels and V1 holds the
    leading right singular vectors of the server's own channel restricted to
    that null space.
    """
    if not 0 <= m < len(channels):
        raise ValueError(f"server index {m} out of range")
    h_m = np.asarray(channels[m], dtype=complex)
    n_cu = h_m.shape[1]
    others = [np.asarray(channels[j], dtype=complex) for j in range(len(channels)) if j != m]
    if others:
        stacked = np.vstack(others)
        if stacked.shape[1] != n_cu:
            raise ValueError("all channels must share the same column count")
        _, sv, vh = np.linalg.svd(stacked, full_matrices=True)
        rank = int(np.sum(sv > _RANK_RTOL * sv[0])) if sv.size else 0
        if rank >= n_cu:
            raise ChannelError("BD infeasible: interference fills the receive space")
        v0 = vh.conj().T[:, rank:]
    else:
        v0 = np.eye(n_cu, dtype=complex)
    h_eff = h_m @ v0
    _, sv2, vh2 = np.linalg.svd(h_eff, full_matrices=False)
    if sv2.size == 0 or sv2[0] <= 0:
        raise ChannelError("BD infeasible: server channel vanishes in the null space")
    rank2 = int(np.sum(sv2 > _RANK_RTOL * sv2[0]))
    v1 = vh2.conj().T[:, :rank2]
    w = v0 @ v1
    gain = float(np.linalg.norm(h_m @ w, "fro") ** 2)
    return BdDecoder(w, gain)


def bd_gains(channels: list[np.ndarray]) -> np.ndarray:
    """Filtered-channel power of every server under block diagonalization."""
    return np.array([bd_decode(channels, m).gain for m in range(len(channels))])


def device_rate(power: float, noise_gain: float, bandwidth: float, sigma2: float) -> float:
    """Zero-forcing uplink rate of one device stream (bit/s)."""
    if power < 0 or noise_gain <= 0 or bandwidth <= 0 or sigma2 <= 0:
        raise ValueError("power must be >= 0; noise_gain, bandwidth, sigma2 must be > 0")
    return bandwidth * np.log2(1.0 + power / (sigma2 * noise_gain))


def mec_rate(power: float, gain: float, bandwidth: float, sigma2: float) -> float:
    """Backhaul rate of one edge server after block diagonalization (bit/s)."""
    if power < 0 or gain < 0 or bandwidth <= 0 or sigma2 <= 0:
        raise ValueError("power and gain must be >= 0; bandwidth and sigma2 must be > 0")
    return bandwidth * np.log2(1.0 + power * gain / sigma2)
