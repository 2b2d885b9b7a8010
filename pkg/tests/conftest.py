import numpy as np
import pytest

from randgibbs.base import BaseConfig, FiberSequence, FiberStep, TableModel, sample_fiber_sequence, symbol_fiber
from randgibbs.branches import BranchMap, Identity, Polynomial


def fullshift_fiber(m=2, horizon=16, profiles=None):
    """Deterministic fullshift with m equal-length affine (or given) branches."""
    ivs = [(i / m, (i + 1) / m) for i in range(m)]
    model = TableModel({0: symbol_fiber(ivs, profiles, a0=1.0)})
    cfg = BaseConfig("deterministic", model, symbols=(0,), pattern=(0,), horizon=horizon)
    return sample_fiber_sequence(cfg)


def random_fullshift(ls=(2, 3), probabilities=None, horizon=16, seed=0):
    """Bernoulli base over alphabet sizes ``ls`` with affine fullshift fibers."""
    table = {m: symbol_fiber([(i / m, (i + 1) / m) for i in range(m)], a0=1.0) for m in ls}
    p = probabilities or tuple(1 / len(ls) for _ in ls)
    cfg = BaseConfig("bernoulli", TableModel(table), symbols=tuple(ls), probabilities=p, horizon=horizon, seed=seed)
    return sample_fiber_sequence(cfg)


def fiber_from_matrices(matrices):
    """Fiber built straight from a list of 0/1 matrices with affine branches."""
    steps = []
    for k, A in enumerate(matrices):
        A = np.asarray(A)
        l = A.shape[0]
        br = tuple(BranchMap(Identity(), i / l, (i + 1) / l) for i in range(l))
        steps.append(FiberStep(l, A, br, k, k + 1))
    cfg = BaseConfig("deterministic", TableModel({0: symbol_fiber([(0, 1)])}), pattern=(0,),
                     horizon=len(steps))
    return FiberSequence(cfg, tuple(steps), tuple(range(len(steps) + 1)))


def curved_fullshift(horizon=12):
    """l = 2 fullshift whose first branch is the quadratic 7u/8 + u^2/8."""
    return fullshift_fiber(2, horizon, [Polynomial((0.0, 7 / 8, 1 / 8)), Identity()])


@pytest.fixture
def fiber2():
    return fullshift_fiber(2, 16)
