import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flowoct.bnb import solve_mip
from flowoct.dataset_io import BinaryDataset
from flowoct.formulations import (FAMILIES, FormulationConfig, build, decode, encode,
                                  generate_multi_cuts, tree_objective)
from flowoct.harness import enumerate_all_trees
from flowoct.linprog import TOL_FEAS, primal_violation, read_lp
from flowoct.tree import TreeTopology, g_eval
from helpers import all_trees, random_dataset


def cfg(d, lam=0.0, family="flowoct", mc=False):
    return FormulationConfig(d, lam, family, mc)


def lp_value(model):
    return model.relaxation().objective


def test_config_validation():
    for bad in (dict(depth=0), dict(depth=1, lam=1.5), dict(depth=1, family="binoct"),
                dict(depth=1, family="oct", enable_multi_cuts=True)):
        with pytest.raises(ValueError):
            FormulationConfig(**bad)


def test_flowoct_variable_count():
    rng = np.random.default_rng(0)
    m = build(random_dataset(rng, 4, 3), cfg(2))
    names = m.var_names
    assert m.n_vars == 79
    assert sum(n.startswith("b[") for n in names) == 9
    assert sum(n.startswith("w[") for n in names) == 14
    assert sum(n.startswith("z[") for n in names) == 56
    # fixed order: b block, then w, then z
    kinds = [n[0] for n in names]
    assert kinds == sorted(kinds, key="bwz".index)
    assert m.integer.sum() == 23


def test_flow_conservation_rows_depth1():
    ds = BinaryDataset.from_arrays(np.array([[1]]), np.array([0]), class_names=["A", "B"])
    m = build(ds, cfg(1))
    assert sum(r.name.startswith("flow[") for r in m.rows) == 3


def test_row_growth_with_depth():
    rng = np.random.default_rng(1)
    ds = random_dataset(rng, 30, 4)
    rows = [build(ds, cfg(d)).n_rows for d in (2, 3, 4)]
    for a, b in zip(rows, rows[1:]):
        assert 1.7 < b / a < 2.3


def test_benders_variable_count():
    rng = np.random.default_rng(2)
    m = build(random_dataset(rng, 100, 15), cfg(2, family="benders"))
    assert m.n_vars == 159
    assert m.lazy is not None


def test_oct_zeta_count():
    ds = BinaryDataset.from_arrays(np.array([[0], [1]]), np.array([0, 1]))
    m = build(ds, cfg(1, family="oct"))
    assert sum(n.startswith("zeta[") for n in m.var_names) == 4


@pytest.mark.parametrize("family", FAMILIES)
def test_two_point_optimum(family, two_points):
    rep = solve_mip(build(two_points, cfg(1, family=family)))
    assert rep.objective == pytest.approx(1.0)


@pytest.mark.parametrize("family", ["flowoct", "benders"])
def test_lambda_one_means_no_splits(family):
    rng = np.random.default_rng(3)
    ds = random_dataset(rng, 12, 3)
    m = build(ds, cfg(2, 1.0, family))
    rep = solve_mip(m)
    assert rep.objective == pytest.approx(0.0)
    tree = decode(m.layout, rep.x)
    assert tree.n_splits == 0


def test_benders_g_matches_routing():
    # Example-1 style instance: one feature, two datapoints of different classes
    ds = BinaryDataset.from_arrays(np.array([[0], [1], [0]]), np.array([0, 1, 1]))
    m = build(ds, cfg(1, family="benders"))
    rep = solve_mip(m)
    tree = decode(m.layout, rep.x)
    topo = m.layout.topo
    for i in range(ds.n_samples):
        assert rep.x[m.layout.g[i]] == pytest.approx(g_eval(topo, tree, ds.features[i], ds.labels[i]))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10**6), d=st.integers(1, 2), lam=st.sampled_from([0.0, 0.5]))
def test_ip_equivalence_with_enumeration(seed, d, lam):
    rng = np.random.default_rng(seed)
    ds = random_dataset(rng, int(rng.integers(2, 8)), int(rng.integers(1, 4)))
    best, _ = enumerate_all_trees(ds, d, lam=lam)
    for family in FAMILIES:
        rep = solve_mip(build(ds, cfg(d, lam, family)))
        assert rep.status == "optimal"
        assert rep.objective == pytest.approx(best, abs=1e-6), family


def majority_consistent(tree, ds):
    """Every terminal node predicts a most frequent class among the rows reaching it."""
    from flowoct.tree import route

    reach = {}
    for x, y in zip(ds.features, ds.labels):
        n, _ = route(tree.topo, tree, x)
        reach.setdefault(n, []).append(int(y))
    return all(np.bincount(ys, minlength=ds.n_classes)[tree.label_at(n)] == max(np.bincount(ys))
               for n, ys in reach.items())


@pytest.mark.parametrize("family", FAMILIES)
def test_encode_is_feasible_and_decodes_back(family):
    rng = np.random.default_rng(4)
    ds = random_dataset(rng, 6, 2)
    topo = TreeTopology(2)
    checked = 0
    for lam in (0.0, 0.3):
        m = build(ds, cfg(2, lam, family))
        lp = m.to_lp()
        for tree in all_trees(topo, 2, 2):
            x = encode(m.layout, ds, tree)
            if family == "oct" and not majority_consistent(tree, ds):
                # the misclassification rows only admit majority labels
                assert primal_violation(lp, x) > TOL_FEAS
                continue
            checked += 1
            assert primal_violation(lp, x) <= TOL_FEAS
            if m.lazy is not None:
                assert list(m.lazy(x)) == []
            back = decode(m.layout, x)
            assert np.array_equal(back.predict(ds.features), tree.predict(ds.features))
            assert m.objective(x) == pytest.approx(tree_objective(back, ds, lam))
            if family != "oct":
                assert m.objective(x) == pytest.approx(tree_objective(tree, ds, lam))
    assert checked > 100


def test_multi_cut_examples():
    topo = TreeTopology(1)
    none = BinaryDataset.from_arrays(np.array([[0, 1], [0, 1]]), np.array([0, 1]))
    assert [c.feature for c in generate_multi_cuts(none, topo)] == [1]
    same = BinaryDataset.from_arrays(np.array([[1], [1], [0]]), np.array([0, 0, 1]))
    (c,) = generate_multi_cuts(same, topo)
    assert c.members == (0,)
    aba = BinaryDataset.from_arrays(np.array([[1], [1], [1]]), np.array([0, 1, 0]))
    (c,) = generate_multi_cuts(aba, topo)
    assert (c.node, c.feature, c.members) == (1, 0, (0, 1))
    m = build(aba, cfg(1, mc=True))
    row = [r for r in m.rows if r.name == "multi[1,0]"][0]
    assert len(row.idx) == 3 and row.rhs == 1.0


def test_multi_cuts_only_bottom_layer():
    rng = np.random.default_rng(5)
    ds = random_dataset(rng, 10, 2)
    assert {c.node for c in generate_multi_cuts(ds, TreeTopology(3))} <= {4, 5, 6, 7}


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10**6), d=st.integers(1, 2))
def test_multi_cuts_valid_for_every_tree(seed, d):
    rng = np.random.default_rng(seed)
    ds = random_dataset(rng, int(rng.integers(2, 7)), 2)
    topo = TreeTopology(d)
    m = build(ds, cfg(d, mc=True))
    cuts = [c.to_cut(m.layout) for c in generate_multi_cuts(ds, topo)]
    for tree in all_trees(topo, 2, 2):
        x = encode(m.layout, ds, tree)
        assert all(c.violation(x) <= 1e-9 for c in cuts)
    plain = build(ds, cfg(d))
    assert lp_value(m) <= lp_value(plain) + 1e-6
    assert solve_mip(m).objective == pytest.approx(solve_mip(plain).objective)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10**6), d=st.integers(1, 3))
def test_flowoct_relaxation_no_weaker_than_oct(seed, d):
    rng = np.random.default_rng(seed)
    ds = random_dataset(rng, int(rng.integers(2, 15)), int(rng.integers(1, 5)))
    assert lp_value(build(ds, cfg(d))) <= lp_value(build(ds, cfg(d, family="oct"))) + 1e-6


@pytest.mark.parametrize("family", FAMILIES)
def test_lp_export_names(family, tmp_path):
    rng = np.random.default_rng(6)
    m = build(random_dataset(rng, 3, 2), cfg(1, 0.5, family))
    path = tmp_path / f"{family}.lp"
    m.export_lp(path)
    lp, names, integer = read_lp(path)
    assert names[0] == "b(1,0)"
    assert lp.n_vars == m.n_vars and lp.n_rows == m.n_rows
    assert integer.tolist() == m.integer.tolist()
    assert lp_value(m) == pytest.approx(
        __import__("flowoct.linprog", fromlist=["solve_lp"]).solve_lp(lp).objective)
