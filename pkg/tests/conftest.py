from pathlib import Path
from typing import Callable, List

import numpy as np
import pytest

from medtest.dist import RngStream
from medtest.models import Dataset, MediationFit

ROOT_PATH = Path(__file__).resolve().parents[1]
DATA_PATH = ROOT_PATH / "data"
SCENARIOS_PATH = ROOT_PATH / "scenarios"


@pytest.fixture
def make_fit() -> Callable[..., MediationFit]:
    """Factory of mediation fits, defaulting to α̂=0.2, σ̂_α=0.06, β̂=0.1, σ̂_β=0.04."""

    def _make_fit(
        alpha_hat: float = 0.2,
        se_alpha: float = 0.06,
        beta_hat: float = 0.1,
        se_beta: float = 0.04,
        n: int = 500,
        mediator_index: int = 1,
    ) -> MediationFit:
        return MediationFit(
            alpha_hat=alpha_hat,
            se_alpha=se_alpha,
            beta_hat=beta_hat,
            se_beta=se_beta,
            n=n,
            mediator_index=mediator_index,
        )

    return _make_fit


@pytest.fixture(scope="session")
def random_fits() -> List[MediationFit]:
    """Fits with t-ratios spread across both sides of λ_n, at three sample sizes."""
    rng = RngStream(29)
    count = 5000
    t_ratios = 3.0 * np.asarray(rng.standard_normal((count, 2)))
    ses = 0.01 + 0.2 * np.asarray(rng.uniform((count, 2)))
    sizes = np.array([50, 500, 5000])[np.asarray(rng.uniform(count)).argsort() % 3]
    return [
        MediationFit(
            alpha_hat=float(t[0] * se[0]),
            se_alpha=float(se[0]),
            beta_hat=float(t[1] * se[1]),
            se_beta=float(se[1]),
            n=int(n),
        )
        for t, se, n in zip(t_ratios, ses, sizes)
    ]


@pytest.fixture
def linear_dataset() -> Dataset:
    """A true mediator, then an outcome-only and an exposure-only mediator."""
    rng = RngStream(11)
    n = 300
    exposure = np.asarray(rng.standard_normal(n))
    mediators = (
        0.5
        + np.outer(exposure, [0.4, 0.0, 0.3])
        + np.asarray(rng.standard_normal((n, 3)))
    )
    outcome = (
        0.5
        + 0.5 * exposure
        + mediators @ np.array([0.3, 0.2, 0.0])
        + np.asarray(rng.standard_normal(n))
    )
    return Dataset(exposure=exposure, mediators=mediators, outcome=outcome)


@pytest.fixture
def survival_csv() -> Path:
    return DATA_PATH / "survival_seven_mediators.csv"
