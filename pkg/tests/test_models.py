import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crlmprog.evaluation import auc_score
from crlmprog.models import (
    LEAF,
    ModelError,
    VotingEnsemble,
    feature_importance,
    fit_cart,
    fit_gradient_boosting,
    fit_lasso_logistic,
    fit_multi_horizon,
    fit_random_forest,
    fit_voting_ensemble,
    kkt_violation,
    lambda_grid,
    lambda_max,
    lasso_objective,
    load_model,
    logistic_loss,
    save_model,
    select_lambda_cv,
)
from oracles import lasso_objective as oracle_objective
from oracles import naive_best_split, numeric_lasso_minimum


def logistic_data(n=120, p=4, seed=0, beta=None):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    beta = np.linspace(1.5, -1.0, p) if beta is None else np.asarray(beta)
    y = (rng.random(n) < 1 / (1 + np.exp(-(X @ beta - 0.3)))).astype(float)
    return X, y


# -- LASSO -------------------------------------------------------------------


def test_lasso_full_shrinkage():
    X, y = logistic_data()
    m = fit_lasso_logistic(X, y, lam=1e6)
    assert np.all(m.coefficients == 0.0)
    assert m.intercept == pytest.approx(np.log(y.mean() / (1 - y.mean())), abs=1e-12)
    assert m.convergence.converged


def test_lasso_lambda_max_zeroes_everything():
    X, y = logistic_data(seed=3)
    lmax = lambda_max(X, y)
    assert np.all(fit_lasso_logistic(X, y, lmax * (1 + 1e-9)).coefficients == 0.0)
    assert np.any(fit_lasso_logistic(X, y, lmax * 0.9).coefficients != 0.0)


def test_lasso_direction_separable():
    m = fit_lasso_logistic(np.array([[-1.0], [1.0]]), np.array([0.0, 1.0]), lam=0.0, max_iter=2000)
    assert m.coefficients[0] > 0
    assert m.predict_proba(np.array([[1.0]]))[0] > 0.5


def test_lasso_matches_numeric_minimizer_two_features():
    X, y = logistic_data(n=60, p=2, seed=5)
    m = fit_lasso_logistic(X, y, lam=0.1)
    ours = oracle_objective(m.intercept, m.coefficients, X, y, 0.1)
    assert ours == pytest.approx(lasso_objective(X, y, m.intercept, m.coefficients, 0.1), abs=1e-15)
    assert abs(ours - numeric_lasso_minimum(X, y, 0.1)) < 1e-4
    assert kkt_violation(m, X, y) < 1e-5


@pytest.mark.parametrize("seed", range(8))
def test_lasso_kkt_random(seed):
    rng = np.random.default_rng(100 + seed)
    n, p = int(rng.integers(20, 100)), int(rng.integers(1, 20))
    X, y = logistic_data(n, p, seed, beta=rng.normal(size=p))
    if y.min() == y.max():
        y[0] = 1 - y[0]
    lam = lambda_max(X, y) * float(rng.uniform(0.01, 0.8))
    m = fit_lasso_logistic(X, y, lam)
    assert m.convergence.converged
    assert kkt_violation(m, X, y) < 1e-5


def test_lasso_path_sparsity_monotone():
    X, y = logistic_data(n=200, p=8, seed=11, beta=[2, -1.5, 1, 0.5, 0, 0, 0, 0])
    nnz = [int(np.count_nonzero(fit_lasso_logistic(X, y, lam).coefficients)) for lam in lambda_grid(X, y, 15)]
    assert nnz == sorted(nnz)  # grid runs from large to small lambda
    assert nnz[0] == 0 and nnz[-1] == 8


def test_lasso_probabilities_open_interval():
    X, y = logistic_data(seed=2)
    p = fit_lasso_logistic(X, y, 0.01).predict_proba(X * 3)
    assert np.all((p > 0) & (p < 1))


def test_lasso_errors():
    X, y = logistic_data()
    with pytest.raises(ModelError):
        fit_lasso_logistic(X, np.zeros(len(y)), 0.1)
    bad = X.copy()
    bad[0, 0] = np.nan
    with pytest.raises(ModelError):
        fit_lasso_logistic(bad, y, 0.1)
    with pytest.raises(ModelError):
        fit_lasso_logistic(X, y, -1.0)


def test_lasso_iteration_cap_reported():
    X, y = logistic_data(n=80, p=10, seed=4)
    m = fit_lasso_logistic(X, y, 1e-4, max_iter=3)
    assert not m.convergence.converged and m.convergence.iterations <= 3


def test_lambda_cv_selection_deterministic():
    X, y = logistic_data(n=150, p=6, seed=8)
    a = select_lambda_cv(X, y, seed=1)
    b = select_lambda_cv(X, y, seed=1)
    assert a[0] == b[0] and np.array_equal(a[2], b[2])
    assert len(a[1]) == 30 and a[1][0] == pytest.approx(lambda_max(X, y))
    assert a[1][-1] == pytest.approx(lambda_max(X, y) * 1e-4)


# -- CART --------------------------------------------------------------------


def test_cart_pure_node_is_leaf():
    X = np.random.default_rng(0).normal(size=(6, 2))
    with pytest.raises(ModelError):
        fit_cart(X, np.ones(6))  # single class is a precondition failure
    m = fit_cart(X, np.array([1, 1, 1, 0, 0, 0]), max_depth=None)
    for i in range(m.tree.n_nodes):
        if m.tree.impurity[i] == 0:
            assert m.tree.feature[i] == LEAF


def test_cart_xor_stump():
    X = np.array([[0, 0], [0, 1], [1, 0], [1, 1]] * 5, dtype=float)
    y = np.array([0, 1, 1, 0] * 5, dtype=float)
    m = fit_cart(X, y, max_depth=1)
    assert np.mean(m.predict(X) == y) == 0.5


def test_cart_threshold():
    x = np.linspace(-3, 3, 41)
    y = (x >= 0).astype(float)
    m = fit_cart(x[:, None], y)
    assert m.tree.n_nodes == 3
    assert m.tree.threshold[0] == pytest.approx(-0.15)
    assert np.mean(m.predict(x[:, None]) == y) == 1.0


@pytest.mark.parametrize("seed", range(10))
def test_cart_root_split_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 6, (30, 3)).astype(float)
    y = (rng.random(30) < 0.5).astype(float)
    y[:2] = [0, 1]
    m = fit_cart(X, y, max_depth=1)
    found = naive_best_split(X, y)
    if found is None:
        assert m.tree.n_nodes == 1
        return
    _, j, t = found
    assert (m.tree.feature[0], m.tree.threshold[0]) == (j, t)


def test_cart_tie_prefers_lower_feature():
    x = np.array([0.0, 1.0, 2.0, 3.0])
    X = np.column_stack([x, x])
    m = fit_cart(X, np.array([0, 0, 1, 1.0]), max_depth=1)
    assert m.tree.feature[0] == 0


def test_cart_half_leaf_resolves_to_zero():
    X = np.zeros((4, 1))
    m = fit_cart(X, np.array([0, 1, 0, 1.0]))
    assert m.predict_proba(X)[0] == 0.5 and m.predict(X)[0] == 0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 6))
def test_tree_depth_and_finite_leaves(seed, depth):
    X, y = logistic_data(n=60, p=3, seed=seed)
    if y.min() == y.max():
        return
    m = fit_cart(X, y, max_depth=depth)
    assert m.tree.depth() <= depth
    assert np.isfinite(m.tree.value).all()


# -- forest / boosting -------------------------------------------------------


def test_degenerate_forest_equals_cart():
    X, y = logistic_data(n=80, p=3, seed=9)
    rf = fit_random_forest(X, y, n_trees=1, max_depth=None, feature_subsample=None, bootstrap=False)
    cart = fit_cart(X, y)
    Z = np.random.default_rng(1).normal(size=(50, 3))
    assert np.array_equal(rf.predict_proba(Z), cart.predict_proba(Z))


def test_forest_deterministic():
    X, y = logistic_data(seed=4)
    a = fit_random_forest(X, y, n_trees=10, seed=3)
    b = fit_random_forest(X, y, n_trees=10, seed=3)
    assert a.to_dict() == b.to_dict()
    assert a.to_dict() != fit_random_forest(X, y, n_trees=10, seed=4).to_dict()


def test_forest_oob_on_blobs():
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal(-2, 1, (100, 2)), rng.normal(2, 1, (100, 2))])
    y = np.r_[np.zeros(100), np.ones(100)]
    rf = fit_random_forest(X, y, n_trees=50, seed=0)
    assert rf.oob_score > 0.9
    assert all(t.depth() <= 6 for t in rf.trees)


def test_boosting_zero_trees():
    X, y = logistic_data(seed=1)
    gb = fit_gradient_boosting(X, y, n_trees=0)
    p = y.mean()
    assert np.allclose(gb.predict_proba(X), p, rtol=0, atol=1e-15)


@pytest.mark.parametrize("subsample", [1.0, 0.7])
def test_boosting_training_loss_monotone(subsample):
    X, y = logistic_data(n=150, p=5, seed=6)
    gb = fit_gradient_boosting(X, y, n_trees=60, learning_rate=0.5, max_depth=3, subsample=subsample, seed=2)
    losses = [logistic_loss(y, r) for r in gb.staged_raw_scores(X)]
    assert all(b <= a + 1e-9 for a, b in zip(losses, losses[1:]))
    assert losses[-1] < losses[0]


def test_boosting_threshold_auc():
    x = np.linspace(-1, 1, 60)[:, None]
    y = (x[:, 0] >= 0.1).astype(float)
    gb = fit_gradient_boosting(x, y, n_trees=50)
    assert auc_score(gb.predict_proba(x), y) == 1.0
    assert all(t.depth() <= 3 for t in gb.trees)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 1000), st.sampled_from(["cube", "exp", "affine"]))
def test_monotone_transform_invariance(seed, kind):
    X, y = logistic_data(n=50, p=3, seed=seed)
    if y.min() == y.max():
        return
    f = {"cube": lambda a: a**3 + a, "exp": np.exp, "affine": lambda a: 3.0 * a - 7.0}[kind]
    Xt = f(X)
    for fit in (
        lambda A: fit_cart(A, y, max_depth=4),
        lambda A: fit_random_forest(A, y, n_trees=5, seed=1),
        lambda A: fit_gradient_boosting(A, y, n_trees=5),
    ):
        assert np.array_equal(fit(X).predict(X), fit(Xt).predict(Xt))


# -- voting / multi-horizon --------------------------------------------------


class Const:
    def __init__(self, p):
        self.p = p
        self.feature_names = ["a"]

    def predict_proba(self, X):
        return np.full(len(X), self.p)


def test_voting_arithmetic():
    X = np.zeros((3, 1))
    assert np.all(VotingEnsemble([Const(0.2), Const(0.8)], np.array([0.5, 0.5]), ["a"]).predict_proba(X) == 0.5)


def test_voting_single_and_unit_weight():
    X, y = logistic_data(seed=5)
    cart = {"type": "cart", "params": {"max_depth": 3}}
    one = fit_voting_ensemble(X, y, [cart])
    assert np.array_equal(one.predict_proba(X), fit_cart(X, y, max_depth=3).predict_proba(X))
    two = fit_voting_ensemble(X, y, [cart, {"type": "lasso_logistic", "params": {"lam": 0.05}}], weights=[1, 0])
    assert np.array_equal(two.predict_proba(X), two.members[0].predict_proba(X))


def test_voting_weight_errors():
    X, y = logistic_data()
    cart = {"type": "cart", "params": {"max_depth": 2}}
    with pytest.raises(ModelError):
        fit_voting_ensemble(X, y, [cart, cart], weights=[1, -1])
    with pytest.raises(ModelError):
        fit_voting_ensemble(X, y, [cart, cart], weights=[0, 0])
    with pytest.raises(ModelError):
        fit_voting_ensemble(X, y, [])


def test_voting_is_weighted_mean():
    X, y = logistic_data(seed=7)
    spec = [{"type": "random_forest", "params": {"n_trees": 5}}, {"type": "gradient_boosting", "params": {"n_trees": 5}}]
    ens = fit_voting_ensemble(X, y, spec, weights=[1, 3], seed=2)
    P = ens.member_probabilities(X)
    assert np.array_equal(ens.predict_proba(X), 0.25 * P[0] + 0.75 * P[1])


SMALL = {"type": "voting", "members": [{"type": "random_forest", "params": {"n_trees": 5}},
                                       {"type": "gradient_boosting", "params": {"n_trees": 5}}]}


def test_multi_horizon_identical_labels():
    X, y = logistic_data(seed=8)
    mh = fit_multi_horizon(X, {3: y, 6: y, 12: y}, SMALL, seed=4)
    d = {h: mh.models[h].to_dict() for h in mh.horizons}
    assert d[3] == d[6] == d[12]
    P = mh.predict_proba(X)
    assert P.shape == (len(X), 3) and np.all((P >= 0) & (P <= 1))


def test_multi_horizon_single_class():
    X, y = logistic_data(seed=8)
    with pytest.raises(ModelError, match="12-month"):
        fit_multi_horizon(X, {3: y, 12: np.zeros(len(y))}, SMALL)


# -- importance / serialization ----------------------------------------------


def test_importance_single_feature():
    x = np.linspace(-1, 1, 20)[:, None]
    rep = feature_importance(fit_cart(x, (x[:, 0] > 0).astype(float), feature_names=["only"]))
    assert rep.ranking == [("only", 1.0)]


def test_importance_lasso_zero_coefficient():
    X, y = logistic_data(n=200, p=3, seed=1, beta=[2.0, 0.0, 0.0])
    X[:, 2] = 0.0
    m = fit_lasso_logistic(X, y, 0.02, feature_names=["a", "b", "c"])
    assert m.coefficients[2] == 0.0
    assert feature_importance(m).as_dict()["c"] == 0.0


def test_importance_normalized_descending():
    X, y = logistic_data(n=100, p=3, seed=3)
    rep = feature_importance(fit_random_forest(X, y, n_trees=10, feature_names=["a", "b", "c"]))
    vals = [v for _, v in rep.ranking]
    assert vals == sorted(vals, reverse=True)
    assert rep.cumulative(3) == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(ModelError):
        feature_importance(object())


def test_model_round_trip(tmp_path):
    X, y = logistic_data(n=90, p=4, seed=12)
    ens = fit_voting_ensemble(X, y, [
        {"type": "random_forest", "params": {"n_trees": 4}},
        {"type": "gradient_boosting", "params": {"n_trees": 6, "subsample": 0.8}},
        {"type": "lasso_logistic", "params": {"lam": 0.02}},
        {"type": "cart", "params": {"max_depth": 3}},
    ], seed=5)
    save_model(ens, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    assert np.array_equal(back.predict_proba(X), ens.predict_proba(X))
    mh = fit_multi_horizon(X, {3: y, 6: 1 - y}, SMALL)
    save_model(mh, tmp_path / "mh.json")
    assert np.array_equal(load_model(tmp_path / "mh.json").predict_proba(X), mh.predict_proba(X))
