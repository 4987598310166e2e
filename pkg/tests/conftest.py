import dataclasses
import math

import pytest

from magsqueeze.config import PAPER_SYSTEM
from magsqueeze.params import DerivedParams, SystemParams, derive


@pytest.fixture(scope="session")
def paper_params() -> SystemParams:
    """Reference operating point (nu_1 pinned inside the normal phase)."""
    return SystemParams(**PAPER_SYSTEM)


@pytest.fixture(scope="session")
def paper_derived(paper_params) -> DerivedParams:
    return derive(paper_params)


def make_derived(delta_m: float = 3.0, e2: float = 60.0, g_c: float = 0.9988,
                 nbar_m: float = 0.0, nbar_q: float = 0.0) -> DerivedParams:
    """Synthetic derived parameters with the dimensionless coupling dialed
    directly (for oracle and spectrum tests that scan g_c)."""
    g = 0.5 * g_c * math.sqrt(e2 * delta_m)
    return DerivedParams(
        Delta_q=373.3, Delta_m=297.5, nu_q=5859.6, nu_m=5932.4,
        G=2 * g, g=g, delta_m=delta_m, delta_q=-69.7, Delta_12=1000.0,
        g_c=g_c, zeta=delta_m / e2, nbar_m=nbar_m, nbar_q=nbar_q,
    )


def replace_system(p: SystemParams, **kw) -> SystemParams:
    return dataclasses.replace(p, **kw)
