import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import cells
from cooptree.coopt import (
    CooptParams,
    coopt_log_marginal,
    coopt_posterior,
    coupling_statistic,
    fit,
)
from cooptree.opt import OptParams, ResourceLimitError, opt_log_marginal
from cooptree.oracle import brute_force_coopt_full
from cooptree.space import Dataset, SampleSpace


def pooled(d1, d2):
    return Dataset.from_points(d1.space, np.vstack([d1.points, d2.points]))


class TestClosedForms:
    def test_identical(self, two_cell):
        d1, d2 = two_cell["identical"]
        post = coopt_posterior(d1.space.root(), d1, d2)
        assert post.log_p == pytest.approx(math.log(15 / 512), abs=1e-12)
        assert post.gamma == pytest.approx(11 / 15, abs=1e-12)

    def test_disjoint(self, two_cell):
        d1, d2 = two_cell["disjoint"]
        post = coopt_posterior(d1.space.root(), d1, d2)
        assert post.log_p == pytest.approx(math.log(47 / 512), abs=1e-12)
        assert post.gamma == pytest.approx(11 / 47, abs=1e-12)
        assert post.log_p0 == pytest.approx(math.log(11 / 256), abs=1e-12)
        assert post.rho == pytest.approx(8 / 11, abs=1e-12)
        assert post.lambdas == {0: 1.0}

    def test_pseudocount_update(self, two_cell):
        d1, d2 = two_cell["disjoint"]
        a = coopt_posterior(d1.space.root(), d1, d2).alphas[0]
        assert a == {"sample1": (2.5, 0.5), "sample2": (0.5, 2.5), "base": (2.5, 2.5)}

    def test_table_size(self, two_cell):
        d1, d2 = two_cell["disjoint"]
        assert fit(d1, d2).node_count == 3


class TestTerminals:
    def test_empty_node(self):
        sp = SampleSpace.table(2)
        d1 = cells(2, [[1, 1]])
        assert coopt_log_marginal(sp.table_node([2, None]), d1, d1) == 0.0

    def test_single_cell(self):
        sp = SampleSpace.table(2)
        d1 = cells(2, [[1, 2], [1, 2]])
        d2 = cells(2, [[1, 2]])
        assert coopt_log_marginal(sp.table_node([1, 2]), d1, d2) == 0.0

    def test_single_observation_table(self):
        sp = SampleSpace.table(3)
        d1 = cells(3, [[2, 1, 1]])
        d2 = cells(3, [])
        # counting measure of a node with two intact dims is 4
        assert coopt_log_marginal(sp.table_node([2, None, None]), d1, d2) == pytest.approx(-math.log(4), abs=1e-12)

    def test_single_observation_rectangle(self):
        sp = SampleSpace.rectangle([(0.0, 4.0)])
        d1 = Dataset.from_points(sp, [0.3])
        d2 = Dataset.from_points(sp, [3.1])
        lo, _ = sp.children(sp.root(), 0)
        # relative measure 1/2, so 1/mu(A) = 2 in relative units
        assert coopt_log_marginal(lo, d1, d2) == pytest.approx(math.log(2), abs=1e-12)

    def test_forced_terminal_at_cutoff(self):
        sp = SampleSpace.unit_cube(1)
        x = np.full(5, 0.1)
        d1 = Dataset.from_points(sp, x)
        table = fit(d1, d1, CooptParams(cutoff=0.25))
        deep = [e for e in table.entries.values() if e.kind == "terminal" and e.n > 0]
        assert deep and all(table.gamma_of(e) == 1.0 and table.rho_of(e) == 1.0 for e in deep)
        assert all(sum(sp.key_depths(e.key)) == 2 for e in deep)
        assert all(e.log_p == -10 * math.log(0.25) for e in deep)

    def test_shortcut_is_exact(self):
        rng = np.random.default_rng(1)
        sp = SampleSpace.unit_cube(1)
        d1 = Dataset.from_points(sp, rng.random(30))
        d2 = Dataset.from_points(sp, rng.random(20) ** 2)
        a = fit(d1, d2, CooptParams(shortcut=True)).log_marginal
        b = fit(d1, d2, CooptParams(shortcut=False)).log_marginal
        assert a == pytest.approx(b, abs=1e-10)


class TestReductions:
    def test_gamma_one_equals_pooled_opt(self):
        rng = np.random.default_rng(2)
        sp = SampleSpace.unit_cube(2)
        d1 = Dataset.from_points(sp, rng.random((40, 2)))
        d2 = Dataset.from_points(sp, rng.beta(2, 2, (30, 2)))
        table = fit(d1, d2, CooptParams(gamma0=1.0, rho0=0.4))
        expect = opt_log_marginal(sp.root(), pooled(d1, d2), OptParams(rho0=0.4))
        assert table.log_marginal == expect
        assert all(table.gamma_post(k) == 1.0 for k in table.entries)

    def test_fully_degenerate(self):
        d1 = cells(3, [[1, 2, 1], [2, 2, 2]])
        d2 = cells(3, [[1, 1, 1]])
        table = fit(d1, d2, CooptParams(gamma0=1.0, rho0=1.0))
        assert table.relative_log_marginal() == 0.0


class TestPosteriorTable:
    def test_empty_data(self):
        e = cells(2, [])
        table = fit(e, e, CooptParams(gamma0=0.3, rho0=0.6))
        k = table.root_key
        assert table.gamma_post(k) == 0.3
        assert table.rho_post(k) == 0.6
        assert table.lambda_post(k) == {0: 0.5, 1: 0.5}
        assert coupling_statistic(e, e, CooptParams(gamma0=0.3)) == 0.3

    def test_invariants(self):
        rng = np.random.default_rng(3)
        sp = SampleSpace.unit_cube(2)
        d1 = Dataset.from_points(sp, rng.random((60, 2)))
        d2 = Dataset.from_points(sp, rng.random((60, 2)) ** 1.5)
        table = fit(d1, d2)
        lg = math.log(table.params.gamma0)
        for k, e in table.entries.items():
            assert 0.0 <= table.gamma_post(k) <= 1.0
            assert 0.0 <= table.rho_post(k) <= 1.0
            for lam in (table.lambda_post(k), table.lambda_base_post(k)):
                if lam:
                    assert abs(sum(lam.values()) - 1.0) <= 1e-10
            assert e.log_p >= lg + e.log_p0 - 1e-12

    def test_table_node_bound(self):
        rng = np.random.default_rng(4)
        d1 = Dataset.from_points(SampleSpace.table(3), rng.integers(1, 3, (40, 3)))
        d2 = Dataset.from_points(SampleSpace.table(3), rng.integers(1, 3, (40, 3)))
        assert fit(d1, d2).node_count <= 27

    def test_resource_limit(self):
        rng = np.random.default_rng(5)
        sp = SampleSpace.unit_cube(2)
        d = Dataset.from_points(sp, rng.random((100, 2)))
        with pytest.raises(ResourceLimitError):
            fit(d, d, CooptParams(max_nodes=100))

    def test_json(self, two_cell):
        d1, d2 = two_cell["disjoint"]
        doc = json.loads(fit(d1, d2).to_json())
        assert doc["node_count"] == 3
        root = [n for n in doc["nodes"] if n["region"] == "all"][0]
        assert root["gamma_post"] == pytest.approx(11 / 47)
        assert root["lambda_post"] == {"1": 1.0}
        assert set(root) >= {"key", "n1", "n2", "rho_post", "log_p", "log_p0"}

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            CooptParams(gamma0=0.0)
        with pytest.raises(ValueError):
            CooptParams(alpha1=0.0)


def test_monotone_evidence():
    base_id = ([[1], [2]], [[1], [2]])
    base_dj = ([[1], [1]], [[2], [2]])
    g_id, g_dj = [], []
    for k in (1, 2, 4, 8):
        g_id.append(coupling_statistic(cells(1, base_id[0] * k), cells(1, base_id[1] * k)))
        g_dj.append(coupling_statistic(cells(1, base_dj[0] * k), cells(1, base_dj[1] * k)))
    assert all(a < b for a, b in zip(g_id, g_id[1:]))
    assert all(a > b for a, b in zip(g_dj, g_dj[1:]))
    assert g_id[-1] > 0.9 and g_dj[-1] < 1e-3


def test_label_swap_symmetry():
    rng = np.random.default_rng(6)
    sp = SampleSpace.unit_cube(2)
    d1 = Dataset.from_points(sp, rng.random((50, 2)))
    d2 = Dataset.from_points(sp, rng.beta(2, 5, (40, 2)))
    a, b = fit(d1, d2), fit(d2, d1)
    assert a.log_marginal == b.log_marginal
    assert a.gamma_post(a.root_key) == b.gamma_post(b.root_key)


def test_coordinate_permutation():
    rng = np.random.default_rng(7)
    x1 = rng.integers(1, 3, (60, 4))
    x2 = rng.integers(1, 3, (60, 4))
    x2[:20, 2] = 2
    perm = [2, 0, 3, 1]
    sp = SampleSpace.table(4)
    d1, d2 = Dataset.from_points(sp, x1), Dataset.from_points(sp, x2)
    a = fit(d1, d2)
    b = fit(d1.permuted_dims(perm), d2.permuted_dims(perm))
    la, lb = a.lambda_post(a.root_key), b.lambda_post(b.root_key)
    assert all(lb[k] == pytest.approx(la[perm[k]], abs=1e-14) for k in range(4))
    assert a.gamma_post(a.root_key) == b.gamma_post(b.root_key)


@settings(max_examples=80, deadline=None)
@given(
    st.integers(1, 3),
    st.lists(st.tuples(st.integers(1, 2), st.integers(1, 2), st.integers(1, 2)), max_size=3),
    st.lists(st.tuples(st.integers(1, 2), st.integers(1, 2), st.integers(1, 2)), max_size=3),
    st.sampled_from([0.3, 0.5, 0.9]),
    st.sampled_from([0.3, 0.5, 0.9]),
)
def test_matches_brute_force(p, r1, r2, gamma, rho):
    d1 = cells(p, [r[:p] for r in r1])
    d2 = cells(p, [r[:p] for r in r2])
    params = CooptParams(gamma0=gamma, rho0=rho, cutoff=0.0)
    table = fit(d1, d2, params)
    ref = brute_force_coopt_full(d1.space, d1, d2, params)
    assert table.log_marginal == pytest.approx(ref.log_p, abs=1e-9)
    assert table.gamma_post(table.root_key) == pytest.approx(ref.gamma_post, abs=1e-9)


def test_schedule_independence():
    rng = np.random.default_rng(8)
    sp = SampleSpace.unit_cube(2)
    d1 = Dataset.from_points(sp, rng.random((300, 2)))
    d2 = Dataset.from_points(sp, rng.beta(2, 2, (300, 2)))
    a = fit(d1, d2)
    b = fit(d1, d2, workers=4)
    assert a.entries.keys() == b.entries.keys()
    assert all(a[k].log_p == b[k].log_p and a[k].log_p0 == b[k].log_p0 for k in a.entries)
