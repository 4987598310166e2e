"""Physical parameters of the cavity-magnon-qubit system and every quantity
derived from them.

Units
-----
All configuration values are ordinary frequencies nu = omega / 2pi in MHz
(couplings, drive Rabi frequencies and decay rates included), temperatures in
kelvin, phases in radians.  Dynamical code converts to angular frequencies in
rad/us by multiplying with ``TWO_PI`` (1 MHz * 1 us = 1, so 2pi*MHz*us is
order one and the integrator stays well conditioned).  Time is microseconds
internally; file output uses nanoseconds.

Physical constants are CODATA 2018 / SI-exact values, defined here and
nowhere else.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

__all__ = [
    "TWO_PI",
    "HBAR",
    "K_B",
    "PLANCK_H",
    "SystemParams",
    "DerivedParams",
    "derive",
    "thermal_occupation",
    "check_regime",
]

TWO_PI = 2.0 * math.pi

# CODATA 2018 (h and k_B are exact in the 2019 SI definition)
PLANCK_H = 6.62607015e-34  # J s
HBAR = 1.054571817e-34  # J s
K_B = 1.380649e-23  # J / K


@dataclass(frozen=True)
class SystemParams:
    """Raw inputs: bare frequencies, couplings, drives, rates (all nu = omega/2pi
    in MHz), bath temperature in kelvin and the relative drive phase in radians."""

    nu_c: float  # cavity frequency
    nu_Q: float  # bare qubit transition frequency
    nu_M: float  # bare magnon (Kittel-mode) frequency
    g_cq: float  # cavity-qubit coupling
    g_cm: float  # cavity-magnon coupling
    E1: float  # Rabi frequency of drive 1
    E2: float  # Rabi frequency of drive 2
    nu_1: float  # frequency of drive 1
    nu_2: float  # frequency of drive 2
    kappa: float  # magnon dissipation rate
    gamma: float  # qubit dissipation rate
    gamma_phi: float  # qubit pure dephasing rate
    T: float  # bath temperature, kelvin
    delta_phi: float = 0.0  # relative phase of the two drives, radians

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ValueError(f"{f.name} must be a finite number, got {v!r}")
        nonneg = ("nu_c", "nu_Q", "nu_M", "g_cq", "g_cm", "E1", "E2",
                  "nu_1", "nu_2", "kappa", "gamma", "gamma_phi", "T")
        for name in nonneg:
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")


@dataclass(frozen=True)
class DerivedParams:
    """Everything computed from :class:`SystemParams`; frequencies in MHz."""

    Delta_q: float  # cavity-qubit detuning nu_c - nu_Q
    Delta_m: float  # cavity-magnon detuning nu_c - nu_M
    nu_q: float  # dressed qubit frequency after cavity elimination
    nu_m: float  # dressed magnon frequency after cavity elimination
    G: float  # cavity-mediated qubit-magnon coupling
    g: float  # two-level coupling of the critical model, G/2
    delta_m: float  # magnon detuning from drive 1
    delta_q: float  # qubit detuning from drive 1
    Delta_12: float  # drive-drive detuning nu_1 - nu_2
    g_c: float  # dimensionless coupling; phase transition at 1
    zeta: float  # frequency ratio delta_m / E2 (expansion parameter)
    nbar_m: float  # thermal magnon occupation at nu_m
    nbar_q: float  # thermal qubit occupation at nu_q


def thermal_occupation(nu_mhz: float, temperature_k: float) -> float:
    """Bose-Einstein mean occupation at frequency nu (MHz) and temperature T (K).

    Returns exactly 0 at T = 0.
    """
    if nu_mhz <= 0:
        raise ValueError(f"frequency must be positive, got {nu_mhz} MHz")
    if temperature_k < 0:
        raise ValueError(f"temperature must be >= 0, got {temperature_k} K")
    if temperature_k == 0.0:
        return 0.0
    x = PLANCK_H * nu_mhz * 1e6 / (K_B * temperature_k)
    return 1.0 / math.expm1(x)


def derive(p: SystemParams) -> DerivedParams:
    """Populate every derived quantity from the raw inputs.

    Chain: cavity detunings -> dressed frequencies -> mediated coupling G
    (and g = G/2) -> drive-frame detunings -> dimensionless coupling
    g_c = 2 g / sqrt(E2 * delta_m) and zeta = delta_m / E2 -> thermal
    occupations at the dressed frequencies.
    """
    Delta_q = p.nu_c - p.nu_Q
    Delta_m = p.nu_c - p.nu_M
    if Delta_m == 0.0:
        raise ValueError("Delta_m = nu_c - nu_M is zero; cavity elimination undefined")
    if Delta_q == 0.0:
        raise ValueError("Delta_q = nu_c - nu_Q is zero; cavity elimination undefined")
    nu_m = p.nu_M + p.g_cm**2 / Delta_m
    nu_q = p.nu_Q + p.g_cq**2 / Delta_q
    G = 0.5 * p.g_cq * p.g_cm * (1.0 / Delta_m + 1.0 / Delta_q)
    g = 0.5 * G
    delta_m = nu_m - p.nu_1
    delta_q = nu_q - p.nu_1
    Delta_12 = p.nu_1 - p.nu_2
    if p.E2 <= 0.0:
        raise ValueError("E2 must be positive (sets the two-level splitting of the critical model)")
    if g == 0.0:
        g_c = 0.0  # decoupled limit regardless of the drive detuning sign
    elif delta_m <= 0.0:
        raise ValueError(
            f"g_c undefined: delta_m = nu_m - nu_1 = {delta_m:.6g} MHz must be positive"
        )
    else:
        g_c = 2.0 * g / math.sqrt(p.E2 * delta_m)
    zeta = delta_m / p.E2
    nbar_m = thermal_occupation(nu_m, p.T)
    nbar_q = thermal_occupation(nu_q, p.T)
    return DerivedParams(
        Delta_q=Delta_q,
        Delta_m=Delta_m,
        nu_q=nu_q,
        nu_m=nu_m,
        G=G,
        g=g,
        delta_m=delta_m,
        delta_q=delta_q,
        Delta_12=Delta_12,
        g_c=g_c,
        zeta=zeta,
        nbar_m=nbar_m,
        nbar_q=nbar_q,
    )


def check_regime(d: DerivedParams, p: SystemParams) -> list[str]:
    """Advisory checks on the approximations behind the effective model.

    Returns one human-readable warning per violated condition; never raises.
    """
    warnings: list[str] = []
    ref = max(abs(d.Delta_12), abs(2.0 * p.E1), 1.0)
    if abs(d.Delta_12 - 2.0 * p.E1) > 1e-6 * ref:
        warnings.append(
            f"drive matching violated: Delta_12 = {d.Delta_12:.6g} MHz != 2*E1 = {2 * p.E1:.6g} MHz"
        )
    if p.E2 > 0 and d.Delta_12 / p.E2 < 10.0:
        warnings.append(
            f"rotating-wave condition weak: Delta_12/E2 = {d.Delta_12 / p.E2:.3g} < 10"
        )
    if d.G > 0 and d.Delta_12 / d.G < 10.0:
        warnings.append(
            f"rotating-wave condition weak: Delta_12/G = {d.Delta_12 / d.G:.3g} < 10"
        )
    if p.g_cq > 0 and d.Delta_q / p.g_cq < 3.0:
        warnings.append(
            f"dispersive condition weak: Delta_q/g_cq = {d.Delta_q / p.g_cq:.3g} < 3"
        )
    if p.g_cm > 0 and d.Delta_m / p.g_cm < 3.0:
        warnings.append(
            f"dispersive condition weak: Delta_m/g_cm = {d.Delta_m / p.g_cm:.3g} < 3"
        )
    if d.zeta > 0.1:
        warnings.append(
            f"low-frequency expansion strained: zeta = delta_m/E2 = {d.zeta:.3g} > 0.1"
        )
    return warnings
