import dataclasses
import math

import pytest

from magsqueeze.params import (
    K_B,
    PLANCK_H,
    SystemParams,
    check_regime,
    derive,
    thermal_occupation,
)

from conftest import replace_system


class TestDerive:
    def test_paper_detunings_and_effective_frequencies(self, paper_params, paper_derived):
        d = paper_derived
        assert abs(d.Delta_q - 373.3) < 1e-9
        assert abs(d.Delta_m - 297.5) < 1e-9
        # quoted to 0.1 MHz in the source parameter set
        assert abs(d.nu_q - 5859.6) < 0.1
        assert abs(d.nu_m - 5932.4) < 0.1
        assert abs(d.G - 13.4) < 0.1

    def test_oracle_arithmetic(self, paper_derived):
        # independent recomputation of the chain
        g_expected = 0.5 * 74.7 * 59.5 * (1.0 / 297.5 + 1.0 / 373.3)
        assert abs(paper_derived.G - g_expected) < 1e-12
        assert paper_derived.g == 0.5 * paper_derived.G
        nu_m = 5920.5 + 59.5**2 / 297.5
        assert abs(paper_derived.nu_m - nu_m) < 1e-12

    def test_drive_frame_quantities(self, paper_derived):
        d = paper_derived
        assert abs(d.delta_m - 3.01) < 1e-9
        assert abs(d.Delta_12 - 1000.0) < 1e-9
        assert abs(d.zeta - 3.01 / 60.0) < 1e-12
        # pinned drive frequency puts the coupling just inside the normal phase
        assert abs(d.g_c - d.G / math.sqrt(60.0 * d.delta_m)) < 1e-12
        assert 0.995 <= d.g_c <= 1.0

    def test_quoted_drive_frequency_straddles_critical_point(self, paper_params):
        # with nu_1 at exactly 5929.4 the exact chain lands 5e-4 past g_c = 1;
        # frozen here to document the rounding sensitivity
        d = derive(replace_system(paper_params, nu_1=5929.4, nu_2=4929.4))
        assert abs(d.delta_m - 3.0) < 1e-9
        assert abs(d.g_c - 1.000505345) < 1e-6

    def test_decoupled_limit(self, paper_params):
        d = derive(replace_system(paper_params, g_cq=0.0, g_cm=0.0))
        assert d.G == 0.0 and d.g == 0.0 and d.g_c == 0.0

    def test_zero_detuning_rejected(self, paper_params):
        with pytest.raises(ValueError, match="Delta_m"):
            derive(replace_system(paper_params, nu_M=paper_params.nu_c))
        with pytest.raises(ValueError, match="Delta_q"):
            derive(replace_system(paper_params, nu_Q=paper_params.nu_c))

    def test_negative_drive_detuning_rejected(self, paper_params):
        with pytest.raises(ValueError, match="g_c undefined"):
            derive(replace_system(paper_params, nu_1=6000.0))

    def test_scale_consistency(self, paper_params):
        s = 1.7
        freq_fields = ("nu_c", "nu_Q", "nu_M", "g_cq", "g_cm", "E1", "E2", "nu_1", "nu_2")
        scaled = replace_system(
            paper_params, **{f: s * getattr(paper_params, f) for f in freq_fields}
        )
        d0, d1 = derive(paper_params), derive(scaled)
        for name in ("Delta_q", "Delta_m", "nu_q", "nu_m", "G", "g", "delta_m", "delta_q", "Delta_12"):
            assert abs(getattr(d1, name) - s * getattr(d0, name)) < 1e-7 * abs(s * getattr(d0, name) or 1.0)
        assert abs(d1.g_c - d0.g_c) < 1e-12
        assert abs(d1.zeta - d0.zeta) < 1e-12


class TestThermalOccupation:
    def test_zero_temperature(self):
        assert thermal_occupation(5932.4, 0.0) == 0.0

    def test_against_direct_formula(self):
        for nu, temp in ((5932.4, 0.010), (5932.4, 0.100), (100.0, 0.3)):
            x = PLANCK_H * nu * 1e6 / (K_B * temp)
            expected = 1.0 / (math.exp(x) - 1.0)
            assert abs(thermal_occupation(nu, temp) - expected) < 1e-12 * expected

    def test_reference_values(self):
        assert abs(thermal_occupation(5932.4, 0.010) - 4.3e-13) < 0.05e-13
        assert abs(thermal_occupation(5932.4, 0.100) - 0.062) < 5e-4

    def test_monotonic(self):
        temps = [0.01, 0.05, 0.1, 0.2, 0.5]
        vals = [thermal_occupation(5000.0, t) for t in temps]
        assert all(b > a for a, b in zip(vals, vals[1:]))
        freqs = [1000.0, 3000.0, 6000.0]
        vals_f = [thermal_occupation(f, 0.1) for f in freqs]
        assert all(b < a for a, b in zip(vals_f, vals_f[1:]))

    def test_rejects_bad_frequency(self):
        with pytest.raises(ValueError):
            thermal_occupation(0.0, 0.1)


class TestCheckRegime:
    def test_reference_point_clean(self, paper_params, paper_derived):
        assert check_regime(paper_derived, paper_params) == []
        assert paper_derived.Delta_12 / 60.0 > 10  # comfortably inside the RWA window
        assert paper_derived.zeta < 0.1

    def test_drive_matching_warning(self, paper_params):
        p = replace_system(paper_params, E1=400.0)
        d = derive(p)
        warnings = check_regime(d, p)
        assert any("drive matching" in w for w in warnings)

    def test_dispersive_warning(self, paper_params):
        p = replace_system(paper_params, g_cq=200.0)
        d = derive(p)
        assert any("Delta_q/g_cq" in w for w in check_regime(d, p))


class TestSystemParams:
    def test_rejects_negative_rate(self):
        with pytest.raises(ValueError, match="kappa"):
            SystemParams(
                nu_c=1, nu_Q=1, nu_M=1, g_cq=0, g_cm=0, E1=0, E2=1, nu_1=0, nu_2=0,
                kappa=-1, gamma=0, gamma_phi=0, T=0,
            )

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            SystemParams(
                nu_c=math.nan, nu_Q=1, nu_M=1, g_cq=0, g_cm=0, E1=0, E2=1, nu_1=0,
                nu_2=0, kappa=0, gamma=0, gamma_phi=0, T=0,
            )
