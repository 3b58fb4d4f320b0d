"""Network geometry and long-term channel statistics.

Access points (APs) with N-antenna uniform linear arrays serve K single-antenna
user equipments (UEs) over a square service area.  Each AP-UE link gets an
indoor-hotspot path loss, log-normal shadowing, and a Rician factor that splits
the link power between a random-phase line-of-sight (LOS) component and an
isotropic scattered component.
"""

import csv
from dataclasses import dataclass, field

import numpy as np


@dataclass
class NetworkConfig:
    """Static system parameters. Powers in watts, distances in meters."""

    area_side: float = 30.0
    num_aps: int = 9
    antennas_per_ap: int = 2
    num_ues: int = 4
    carrier_freq: float = 3.4e9
    bandwidth: float = 20e6
    noise_power: float = 2.5118864315095823e-13   # -96 dBm
    pilot_power: float = 1e-7                     # -40 dBm
    ap_power_budget: float = 10.0 / 36.0
    tau_c: int = 200
    tau_p: int = 2
    tau_d: int = 25
    tau_u: int = 173
    ap_ue_height_diff: float = 4.0
    rng_seed: int = 0
    ap_placement: str = "grid"                    # "grid" | "random"

    def __post_init__(self):
        if self.tau_p + self.tau_d + self.tau_u != self.tau_c:
            raise ValueError(
                "coherence block split violated: tau_p + tau_d + tau_u "
                f"= {self.tau_p + self.tau_d + self.tau_u} != tau_c = {self.tau_c}"
            )
        if min(self.num_aps, self.antennas_per_ap, self.num_ues) < 1:
            raise ValueError("counts must be >= 1")
        if min(self.tau_p, self.tau_d, self.tau_u) < 1 or self.tau_p > self.tau_c:
            raise ValueError("block lengths must be positive and tau_p <= tau_c")
        if min(self.noise_power, self.pilot_power, self.ap_power_budget) <= 0:
            raise ValueError("powers must be positive")
        if self.area_side <= 0 or self.carrier_freq <= 0 or self.bandwidth <= 0:
            raise ValueError("area, carrier and bandwidth must be positive")
        if self.ap_placement not in ("grid", "random"):
            raise ValueError("ap_placement must be 'grid' or 'random'")


@dataclass
class Geometry:
    """AP/UE planar positions plus 3D distances and planar bearings."""

    ap_positions: np.ndarray    # (L, 2)
    ue_positions: np.ndarray    # (K, 2)
    distances: np.ndarray       # (K, L) 3D, includes AP-UE height difference
    azimuths: np.ndarray        # (K, L) planar bearing AP -> UE, radians


@dataclass
class ChannelStatistics:
    """Per-link second-order statistics.

    los[k, l] is the LOS vector (zero for non-LOS links), beta[k, l] the
    scattered-power gain, and R[k, l] = los los^H + beta I the full spatial
    correlation of the link.
    """

    los: np.ndarray     # (K, L, N) complex
    beta: np.ndarray    # (K, L) > 0
    R: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.R is None:
            K, L, N = self.los.shape
            outer = np.einsum("kln,klm->klnm", self.los, self.los.conj())
            self.R = outer + self.beta[:, :, None, None] * np.eye(N)

    @property
    def num_ues(self):
        return self.los.shape[0]

    @property
    def num_aps(self):
        return self.los.shape[1]

    @property
    def num_antennas(self):
        return self.los.shape[2]


@dataclass
class ChannelRealization:
    g: np.ndarray       # (..., K, L, N) complex channel draws
    theta: np.ndarray   # (..., K, L) common phase of the LOS component


def generate_geometry(cfg, rng):
    """Drop APs (grid or uniform) and UEs (uniform) in the square area.

    Distances are 3D: the configured AP-UE height difference is always
    included, so co-located planar points stay separated.
    """
    L, K, S = cfg.num_aps, cfg.num_ues, cfg.area_side
    if cfg.ap_placement == "grid":
        side = int(round(np.sqrt(L)))
        if side * side == L:
            step = S / side
            coords = (np.arange(side) + 0.5) * step
            xx, yy = np.meshgrid(coords, coords)
            ap = np.column_stack([xx.ravel(), yy.ravel()])
        else:
            # no square grid exists for this L, fall back to random placement
            ap = rng.uniform(0, S, size=(L, 2))
    else:
        ap = rng.uniform(0, S, size=(L, 2))
    ue = rng.uniform(0, S, size=(K, 2))

    diff = ue[:, None, :] - ap[None, :, :]
    planar = np.linalg.norm(diff, axis=2)
    dist = np.sqrt(planar**2 + cfg.ap_ue_height_diff**2)
    azim = np.arctan2(diff[:, :, 1], diff[:, :, 0])
    return Geometry(ap_positions=ap, ue_positions=ue, distances=dist, azimuths=azim)


# Indoor-hotspot propagation constants (3GPP TR 36.814 indoor hotspot tables,
# Rician factor per the ITU-R indoor LOS model). Kept in one table so a
# different propagation model can be swapped in without touching the sampling
# logic below. Path loss in dB for d in meters and carrier in GHz:
#   LOS : 16.9 log10(d) + 32.8 + 20 log10(fc)
#   NLOS: 43.3 log10(d) + 11.5 + 20 log10(fc)
INDOOR_HOTSPOT = {
    "los_pl_slope": 16.9,
    "los_pl_const": 32.8,
    "nlos_pl_slope": 43.3,
    "nlos_pl_const": 11.5,
    "freq_slope": 20.0,
    "los_shadow_std_db": 3.0,
    "nlos_shadow_std_db": 4.0,
    "los_prob_inner": 18.0,     # certain LOS below this distance
    "los_prob_outer": 37.0,     # floor probability beyond this distance
    "los_prob_decay": 27.0,
    "los_prob_floor": 0.5,
    "rician_mean_db": 7.0,
    "rician_std_db": 4.0,
}


def los_probability(d, table=INDOOR_HOTSPOT):
    """LOS probability as a function of link distance d in meters."""
    d = np.asarray(d, dtype=float)
    p = np.where(
        d <= table["los_prob_inner"],
        1.0,
        np.where(
            d < table["los_prob_outer"],
            np.exp(-(d - table["los_prob_inner"]) / table["los_prob_decay"]),
            table["los_prob_floor"],
        ),
    )
    return p


def path_loss_db(d, carrier_freq, los, table=INDOOR_HOTSPOT):
    """Median path loss in dB for 3D distance d (m) at the given carrier (Hz)."""
    fc_ghz = carrier_freq / 1e9
    d = np.asarray(d, dtype=float)
    pl_los = table["los_pl_slope"] * np.log10(d) + table["los_pl_const"]
    pl_nlos = table["nlos_pl_slope"] * np.log10(d) + table["nlos_pl_const"]
    pl = np.where(los, pl_los, pl_nlos) + table["freq_slope"] * np.log10(fc_ghz)
    return pl


def steering_vector(azimuth, num_antennas):
    """Far-field response of a half-wavelength uniform linear array.

    The angle is measured from the array broadside; entries have unit modulus.
    """
    n = np.arange(num_antennas)
    phase = np.pi * np.sin(np.atleast_1d(azimuth))[..., None] * n
    return np.exp(1j * phase)


def large_scale_stats(geometry, cfg, rng, table=INDOOR_HOTSPOT):
    """Draw LOS states, shadowing and Rician factors; build ChannelStatistics.

    The total link gain G (path loss plus shadowing, linear) is split between
    the LOS and scattered parts by the Rician factor kappa:
    ||los||^2 = N G kappa/(1+kappa) and beta = G/(1+kappa). Non-LOS links put
    everything into beta.
    """
    K, L = cfg.num_ues, cfg.num_aps
    N = cfg.antennas_per_ap
    d = geometry.distances

    los_state = rng.random((K, L)) < los_probability(d, table)
    shadow_std = np.where(
        los_state, table["los_shadow_std_db"], table["nlos_shadow_std_db"]
    )
    shadow_db = rng.standard_normal((K, L)) * shadow_std
    pl_db = path_loss_db(d, cfg.carrier_freq, los_state, table)
    gain = 10.0 ** (-(pl_db + shadow_db) / 10.0)

    kappa_db = table["rician_mean_db"] + table["rician_std_db"] * rng.standard_normal((K, L))
    kappa = np.where(los_state, 10.0 ** (kappa_db / 10.0), 0.0)

    beta = gain / (1.0 + kappa)
    los_amp = np.sqrt(gain * kappa / (1.0 + kappa))
    steer = steering_vector(geometry.azimuths.ravel(), N).reshape(K, L, N)
    los = los_amp[:, :, None] * steer
    los[~los_state] = 0.0
    return ChannelStatistics(los=los, beta=beta)


def realize_channels(stats, rng, size=None):
    """Sample channels g = exp(j theta) los + scatter, scatter ~ CN(0, beta I).

    With size=None a single (K, L, N) draw is returned; an integer size
    prepends a batch axis. The LOS phase theta is shared by all antennas of a
    link and uniform on [0, 2pi).
    """
    K, L, N = stats.los.shape
    shape = (K, L) if size is None else (size, K, L)
    theta = rng.uniform(0.0, 2.0 * np.pi, size=shape)
    scatter = rng.standard_normal(shape + (N,)) + 1j * rng.standard_normal(shape + (N,))
    scatter *= np.sqrt(stats.beta / 2.0)[..., None]
    g = np.exp(1j * theta)[..., None] * stats.los + scatter
    return ChannelRealization(g=g, theta=theta)


def geometry_to_csv(geometry, path):
    """Dump positions and distances for debugging."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["kind", "index", "x", "y"])
        for l, (x, y) in enumerate(geometry.ap_positions):
            w.writerow(["ap", l, f"{x:.6f}", f"{y:.6f}"])
        for k, (x, y) in enumerate(geometry.ue_positions):
            w.writerow(["ue", k, f"{x:.6f}", f"{y:.6f}"])


def stats_to_csv(stats, path):
    """Dump per-link statistics, complex entries interleaved as re/im."""
    K, L, N = stats.los.shape
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        header = ["ue", "ap", "beta"]
        for n in range(N):
            header += [f"los{n}_re", f"los{n}_im"]
        w.writerow(header)
        for k in range(K):
            for l in range(L):
                row = [k, l, repr(float(stats.beta[k, l]))]
                for n in range(N):
                    row += [repr(float(stats.los[k, l, n].real)),
                            repr(float(stats.los[k, l, n].imag))]
                w.writerow(row)
