from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from entropic_dual.main import Settings
from entropic_dual.services.core import LpInstance, OtInstance, SdpInstance, SymMatrix
from entropic_dual.services.generators import generate_lp
from entropic_dual.services.instance_io import read_instance

DATA_DIR = Path(__file__).resolve().parent.parent / "data" / "instances"


def half_mass_lp(seed: int, d: int, m: int) -> LpInstance:
    """Random LP whose feasible set lies in {x >= 0, sum x = 1/2}."""
    inst, x0 = generate_lp(seed, d, m, with_compactness_row=True)
    scale = 0.5 / float(np.sum(x0))
    return LpInstance(cost=inst.cost, con_matrix=inst.con_matrix, rhs=inst.rhs * scale)


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture(scope="session")
def toy_ot() -> OtInstance:
    return OtInstance(
        cost=np.array([[4.0, 1.0], [2.0, 3.0]]),
        source=np.array([0.5, 0.5]),
        target=np.array([0.6, 0.4]),
    )


@pytest.fixture(scope="session")
def toy_lp() -> LpInstance:
    return read_instance(DATA_DIR / "toy_ot.lp")


@pytest.fixture(scope="session")
def simplex_lp() -> LpInstance:
    return LpInstance(cost=np.zeros(2), con_matrix=np.array([[1.0, 1.0]]), rhs=np.array([1.0]))


@pytest.fixture(scope="session")
def degenerate_lp() -> LpInstance:
    return LpInstance(cost=np.array([0.0, 0.0, 1.0]), con_matrix=np.ones((1, 3)), rhs=np.array([1.0]))


@pytest.fixture(scope="session")
def trace_sdp() -> SdpInstance:
    return SdpInstance(
        cost=SymMatrix(np.zeros((2, 2))),
        con_matrices=(SymMatrix.identity(2),),
        rhs=np.array([1.0]),
    )


@pytest.fixture(scope="session")
def small_lp() -> tuple[LpInstance, np.ndarray]:
    return generate_lp(3, 6, 2, with_compactness_row=True)


@pytest.fixture
def settings() -> Settings:
    return Settings()


@pytest.fixture(scope="session")
def half_mass():
    return half_mass_lp
