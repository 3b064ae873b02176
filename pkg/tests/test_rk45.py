import numpy as np
import pytest

from nudgelab import Field, Grid1D, StiffnessError, Tolerances, integrate_rk45
from nudgelab.rk45 import rk45_core

SCALAR = Grid1D(1, 1.0)


def scalar_field(value: float) -> Field:
    return Field(SCALAR, np.array([float(value)]))


def test_linear_decay():
    traj = integrate_rk45(
        lambda t, y: Field(SCALAR, -y.values),
        scalar_field(1.0),
        (0.0, 1.0),
        output_times=[0.0, 1.0],
    )
    assert traj.states[-1].values[0] == pytest.approx(np.exp(-1), abs=1e-5)


def test_zero_rhs_constant_trajectory():
    traj = integrate_rk45(
        lambda t, y: Field(SCALAR, np.zeros(1)),
        scalar_field(3.5),
        (0.0, 2.0),
        output_times=np.linspace(0, 2, 9),
    )
    for state in traj.states:
        assert state.values[0] == 3.5


def test_time_dependent_forcing():
    traj = integrate_rk45(
        lambda t, y: Field(SCALAR, np.array([np.cos(t)])),
        scalar_field(0.0),
        (0.0, np.pi),
        output_times=[0.0, np.pi],
    )
    assert traj.states[-1].values[0] == pytest.approx(0.0, abs=1e-6)


@pytest.mark.parametrize("lam", [-5.0, -1.0, 1.0])
def test_exponential_accuracy_scales_with_tolerance(lam):
    errs = {}
    for rel in (1e-6, 5e-7):
        tol = Tolerances(rel_tol=rel, abs_tol=1e-12)
        traj = integrate_rk45(
            lambda t, y: Field(SCALAR, lam * y.values),
            scalar_field(1.0),
            (0.0, 1.0),
            tol,
            output_times=[0.0, 1.0],
        )
        errs[rel] = abs(traj.states[-1].values[0] - np.exp(lam))
        assert errs[rel] <= 100 * rel * max(1.0, np.exp(lam))
    assert errs[5e-7] <= errs[1e-6] / 2 + 1e-15


def test_dense_output_matches_exponential_inside_steps():
    times = np.linspace(0.0, 1.0, 41)
    traj = integrate_rk45(
        lambda t, y: Field(SCALAR, y.values),
        scalar_field(1.0),
        (0.0, 1.0),
        Tolerances(rel_tol=1e-8, abs_tol=1e-12),
        output_times=times,
    )
    values = np.array([s.values[0] for s in traj.states])
    assert np.abs(values - np.exp(times)).max() < 1e-7


def test_determinism():
    def run():
        traj = integrate_rk45(
            lambda t, y: Field(SCALAR, np.array([np.sin(3 * t) - 0.5 * y.values[0]])),
            scalar_field(0.3),
            (0.0, 5.0),
            output_times=np.linspace(0, 5, 11),
        )
        return np.array([s.values[0] for s in traj.states])

    a, b = run(), run()
    assert np.array_equal(a, b)


def test_stiffness_error_on_singular_rhs():
    # 1/(0.5 - t) blows up inside the span; the controller must give up
    def rhs(t, y):
        return Field(SCALAR, np.array([y.values[0] / (0.5 - t)]))

    with pytest.raises(StiffnessError, match="t="):
        integrate_rk45(rhs, scalar_field(1.0), (0.0, 1.0), output_times=[0.0, 1.0])


def test_output_times_must_lie_in_span():
    with pytest.raises(ValueError, match="output_times"):
        integrate_rk45(
            lambda t, y: Field(SCALAR, -y.values),
            scalar_field(1.0),
            (0.0, 1.0),
            output_times=[0.0, 2.0],
        )


def test_tolerance_validation():
    with pytest.raises(ValueError):
        Tolerances(rel_tol=0.0)
    with pytest.raises(ValueError):
        Tolerances(abs_tol=2.0)
    with pytest.raises(ValueError):
        Tolerances(max_step=-1.0)


def test_max_step_is_respected():
    seen = []

    def rhs(t, y):
        seen.append(t)
        return -y

    times = np.array([0.0, 1.0])
    out = np.empty((2, 1))
    rk45_core(
        rhs, np.array([1.0]), (0.0, 1.0), 1e-6, 1e-9, times,
        lambda i, t, y: out.__setitem__(i, y), max_step=0.01,
    )
    # seven stage evaluations per step, at least 100 steps
    assert len(seen) >= 600


def test_vector_field_state():
    grid = Grid1D(32, 2 * np.pi)
    x = grid.nodes()
    y0 = Field(grid, np.sin(x))

    # decoupled decay: y' = -y componentwise
    traj = integrate_rk45(
        lambda t, y: Field(grid, -y.values), y0, (0.0, 1.0),
        output_times=[0.0, 0.5, 1.0],
    )
    assert np.abs(traj.states[-1].values - np.exp(-1) * np.sin(x)).max() < 1e-6
