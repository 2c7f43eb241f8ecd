import math

import numpy as np
import pytest

from conftest import cells
from cooptree.coopt import CooptParams
from cooptree.opt import OptParams
from cooptree.oracle import (
    EnumerationLimitError,
    brute_force_coopt,
    brute_force_coopt_full,
    brute_force_opt,
)
from cooptree.space import Dataset, SampleSpace


def test_opt_two_cell():
    d = cells(1, [[1], [1], [2], [2]])
    assert brute_force_opt(d.space, d, OptParams()) == pytest.approx(math.log(11 / 256), abs=1e-12)


def test_opt_empty():
    d = cells(2, [])
    assert brute_force_opt(d.space, d, OptParams()) == 0.0


def test_opt_rho_one_is_uniform():
    d = cells(3, [[1, 2, 1], [2, 2, 2], [1, 1, 1]])
    assert brute_force_opt(d.space, d, OptParams(rho0=1.0)) == pytest.approx(-9 * math.log(2), abs=1e-12)


def test_coopt_two_cell(two_cell):
    d1, d2 = two_cell["identical"]
    assert brute_force_coopt(d1.space, d1, d2, CooptParams()) == pytest.approx(math.log(15 / 512), abs=1e-12)
    d1, d2 = two_cell["disjoint"]
    r = brute_force_coopt_full(d1.space, d1, d2, CooptParams())
    assert r.log_p == pytest.approx(math.log(47 / 512), abs=1e-12)
    assert r.gamma_post == pytest.approx(11 / 47, abs=1e-12)
    assert r.n_configs == 3


def test_coopt_gamma_one_is_pooled_opt():
    d1 = cells(2, [[1, 1], [2, 1]])
    d2 = cells(2, [[2, 2], [2, 1], [1, 2]])
    both = cells(2, [[1, 1], [2, 1], [2, 2], [2, 1], [1, 2]])
    a = brute_force_coopt(d1.space, d1, d2, CooptParams(gamma0=1.0, rho0=0.3))
    b = brute_force_opt(both.space, both, OptParams(rho0=0.3))
    assert a == pytest.approx(b, abs=1e-12)


def test_posterior_weights_sum_to_one():
    rng = np.random.default_rng(0)
    sp = SampleSpace.table(3)
    d1 = Dataset.from_points(sp, rng.integers(1, 3, (3, 3)))
    d2 = Dataset.from_points(sp, rng.integers(1, 3, (3, 3)))
    r = brute_force_coopt_full(sp, d1, d2, CooptParams(gamma0=0.3, rho0=0.9))
    assert abs(r.weight_total - 1.0) <= 1e-10
    assert r.n_configs == 2431


def test_refuses_large_tables():
    d = cells(5, [[1] * 5])
    with pytest.raises(EnumerationLimitError):
        brute_force_opt(d.space, d, OptParams())


def test_refuses_continuous():
    sp = SampleSpace.unit_cube(1)
    d = Dataset.from_points(sp, [0.5])
    with pytest.raises(EnumerationLimitError):
        brute_force_opt(sp, d, OptParams())
