import math

import numpy as np
import pytest


def write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(f"{v:.9g}" for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture()
def trajectory_csv(tmp_path):
    def make(name="timeseries_rabi.csv", n=41, amplitude=0.3):
        t = np.linspace(0.0, 2000.0, n)
        v_min = 0.5 - amplitude * np.sin(np.pi * t / 2000.0) ** 2
        s = -10 * np.log10(v_min / 0.5)
        rows = np.column_stack([
            t, v_min, np.zeros(n), s, 1 - v_min, v_min + 0.1,
            v_min, np.zeros(n), np.full(n, 1e-12),
        ])
        header = ["t_ns", "V_min", "theta_opt", "S_dB", "mean_occ", "V11", "V22", "V12", "trace_error"]
        return write_csv(tmp_path / name, header, rows)

    return make


@pytest.fixture()
def family_csv(tmp_path):
    def make(name="sweep_kappa.csv", prefix="S_dB_kappa_", values=(0.1, 0.5, 1.0)):
        t = np.linspace(0.0, 3000.0, 31)
        cols = [t]
        for i, v in enumerate(values):
            cols.append((4.0 - i) * np.sin(np.pi * t / 3000.0))
        header = ["t_ns"] + [f"{prefix}{v:g}" for v in values]
        return write_csv(tmp_path / name, header, np.column_stack(cols))

    return make


@pytest.fixture()
def grid_csv(tmp_path):
    def make(name="grid_maxS.csv"):
        rows = []
        for k in (0.1, 0.5, 1.0):
            for g in (0.003, 0.3):
                rows.append((k, g, 5.0 - 2 * k - g, 150.0, 1.2))
        return write_csv(tmp_path / name, ["kappa", "gamma", "S_max", "t_opt", "theta_opt"], rows)

    return make


@pytest.fixture()
def wigner_csv(tmp_path):
    def make(name="wigner.csv", points=21):
        axis = np.linspace(-3, 3, points)
        rows = []
        for im in axis:
            for re in axis:
                w = (2 / math.pi) * math.exp(-2 * (re**2 / 2.2 + im**2 * 2.2))
                rows.append((re, im, w))
        return write_csv(tmp_path / name, ["re_alpha", "im_alpha", "W"], rows)

    return make


@pytest.fixture()
def phase_csv(tmp_path):
    def make(name="phase_sweep.csv", with_negative=True):
        t = np.linspace(0.0, 3000.0, 25)
        phis = np.linspace(0.0, 2 * math.pi, 9)
        cols = [t]
        for phi in phis:
            base = 4.0 * np.sin(np.pi * t / 3000.0) * math.cos(phi / 2.0) ** 2
            if with_negative:
                base = base - 1.0
            cols.append(base)
        header = ["t_ns"] + [f"S_dB_dphi_{phi:.10g}" for phi in phis]
        return write_csv(tmp_path / name, header, np.column_stack(cols))

    return make
