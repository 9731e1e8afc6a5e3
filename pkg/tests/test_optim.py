import numpy as np
import pytest

from advinfo.optim import milestone_lr, sgd_momentum_step


def _run(steps, lr, momentum, g=1.0, p0=0.0):
    p, v = np.array([p0]), np.zeros(1)
    for _ in range(steps):
        sgd_momentum_step([p], [np.array([g])], [v], lr, momentum)
    return p[0]


def test_plain_sgd_step():
    assert _run(1, 0.1, 0.0) == pytest.approx(-0.1)


def test_two_momentum_steps_hand_recursion():
    # v1 = 1, p1 = -0.1; v2 = 0.9 + 1 = 1.9, p2 = -0.1 - 0.19
    assert _run(2, 0.1, 0.9) == pytest.approx(-0.29, abs=1e-15)


def test_zero_gradient_leaves_params():
    assert _run(5, 0.1, 0.9, g=0.0, p0=1.5) == 1.5


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        sgd_momentum_step([np.zeros(2)], [np.zeros(3)], [np.zeros(2)], 0.1, 0.9)


def test_momentum_range_rejected():
    with pytest.raises(ValueError):
        sgd_momentum_step([np.zeros(1)], [np.zeros(1)], [np.zeros(1)], 0.1, 1.0)


@pytest.mark.parametrize(
    "epoch,expected",
    [(1, 0.1), (19, 0.1), (20, 0.05), (59, 0.05), (60, 0.025), (61, 0.025), (200, 0.025)],
)
def test_milestone_schedule_table_values(epoch, expected):
    assert milestone_lr(epoch, 0.1, [20, 60], 0.5) == pytest.approx(expected, rel=1e-15)


def test_empty_milestones_constant():
    assert all(milestone_lr(e, 0.3, [], 0.5) == 0.3 for e in range(0, 300, 7))


def test_milestones_must_increase():
    with pytest.raises(ValueError):
        milestone_lr(1, 0.1, [60, 20], 0.5)
