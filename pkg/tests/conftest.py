import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from spingrape import (Channel, Coupling, Spin, SpinSystem,
                       build_control_operators, build_drift_hamiltonian,
                       parse_operator_expression)

settings.register_profile(
    "suite", max_examples=40, deadline=None,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("suite")


def make_tce() -> SpinSystem:
    """The 3-spin test system: two carbons split +-541.7 Hz around the carbon
    carrier, hydrogen on resonance, measured J couplings and relaxation."""
    return SpinSystem(
        spins=(Spin("C1", "carbon", 541.7, 1.0, 29.2, 0.23),
               Spin("C2", "carbon", -541.7, 1.0, 17.3, 0.44),
               Spin("H", "hydrogen", 0.0, 4.0, 2.67, 0.20)),
        couplings=(Coupling("H", "C2", 200.8),
                   Coupling("C1", "C2", 103.1),
                   Coupling("C1", "H", 9.0)),
        channels=(Channel("carbon", 2000.0), Channel("hydrogen", 2000.0)),
    )


@pytest.fixture(scope="session")
def tce() -> SpinSystem:
    return make_tce()


@pytest.fixture(scope="session")
def tce_drift(tce):
    return build_drift_hamiltonian(tce)


@pytest.fixture(scope="session")
def tce_controls(tce):
    return build_control_operators(tce)


@pytest.fixture(scope="session")
def tce_equilibrium(tce):
    return parse_operator_expression("Iz(C1)+Iz(C2)+4*Iz(H)", tce)


def diag_of(op) -> np.ndarray:
    return np.real(np.diag(op.entries))


def random_hermitian(rng: np.random.Generator, dim: int, scale: float = 1.0) -> np.ndarray:
    m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return scale * 0.5 * (m + m.conj().T)
