import numpy as np
import pytest

from app.surrogate.cli.emit import panel_to_frame
from app.surrogate.design import Panel
from app.surrogate.simgen import generate_panel, make_config


def make_panel(n_per_arm=4, n_times=3, seed=0, missing=()):
    """Small panel with a surrogate-driven outcome and a treatment shift."""
    rng = np.random.default_rng(seed)
    n_subjects = 2 * n_per_arm
    arms = np.repeat([0, 1], n_per_arm)
    surrogate = rng.normal(size=(n_subjects, n_times)) + 0.5 * arms[:, None]
    outcome = (
        1.0
        + 0.8 * surrogate
        + 0.3 * arms[:, None] * np.arange(n_times)
        + rng.normal(scale=0.5, size=(n_subjects, n_times))
    )
    for i, t in missing:
        outcome[i, t] = np.nan
    ids = [f"p{i:02d}" for i in range(n_subjects)]
    return Panel.from_arrays(ids, arms, outcome, surrogate)


@pytest.fixture
def small_panel():
    """Eight subjects over three times, fully observed."""
    return make_panel()


@pytest.fixture
def gapped_panel():
    """Like ``small_panel`` with a few missing outcomes."""
    return make_panel(missing=((0, 1), (5, 2), (6, 0)))


@pytest.fixture
def simulated_panel():
    """Panel and truth from the generator with 20 subjects per arm."""
    return generate_panel(make_config(n_per_arm=20, horizon=3, seed=11))


@pytest.fixture
def panel_csv(tmp_path, simulated_panel):
    """The simulated panel written as a long-format CSV."""
    path = tmp_path / "panel.csv"
    panel_to_frame(simulated_panel[0]).to_csv(path, index=False)
    return path
