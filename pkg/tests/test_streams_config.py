import json

import numpy as np
import pytest

from opmm import Ball, Box, Simplex
from opmm.config import ConfigError, RunConfig, dumps, loads
from opmm.streams import (
    LinearDriftStream,
    NonconvexSmoothStream,
    QuadConvexStream,
    ball_constraints,
    linear_constraints,
    make_constraints,
    make_set,
    make_stream,
    sine_constraints,
)


# --- streams ------------------------------------------------------------------


def test_stream_round_access_is_deterministic():
    s1 = LinearDriftStream(n=3, seed=42, bias=(1.0, 0.0, 0.0))
    s2 = LinearDriftStream(n=3, seed=42, bias=(1.0, 0.0, 0.0))
    x = np.array([0.3, -0.2, 0.9])
    for t in (1, 5, 17):
        assert s1.oracle(t).value(x) == s2.oracle(t).value(x)
    assert s1.oracle(2).value(x) != s1.oracle(3).value(x)


@pytest.mark.parametrize("make", [
    lambda set_: LinearDriftStream(n=2, seed=9, c_scale=1.3, bias=(-1.0, -0.5)),
    lambda set_: QuadConvexStream(set_=set_, seed=9, a=1.5),
    lambda set_: NonconvexSmoothStream(n=2, seed=9, c_scale=0.8, a_max=0.3),
])
def test_declared_gradient_bounds_hold(make):
    box = Box(lower=[-1.0, -1.0], upper=[1.0, 1.0])
    stream = make(box)
    rng = np.random.default_rng(0)
    X = box.sample(rng, 64)
    worst = 0.0
    for t in range(1, 40):
        oracle = stream.oracle(t)
        worst = max(worst, max(float(np.linalg.norm(oracle.gradient(x))) for x in X))
    assert worst <= stream.kappa_f + 1e-12


def test_quad_stream_aggregate_matches_loop():
    box = Box(lower=[-1.0, -1.0], upper=[1.0, 1.0])
    stream = QuadConvexStream(set_=box, seed=4, a=2.0, b_lower=(0.0, 0.0))
    T = 12
    a_bar, m, c = stream.aggregate_quadratic(T)
    z = np.array([0.3, -0.7])
    direct = np.mean([float(stream.oracle(t).value(z)) for t in range(1, T + 1)])
    agg = 0.5 * a_bar * float(z @ z) - float(z @ m) + c
    assert agg == pytest.approx(direct, rel=1e-12)


def test_nonconvex_stream_hessian_bound():
    stream = NonconvexSmoothStream(n=2, seed=3, a_max=0.25)
    # gradient Lipschitz modulus along axes is |a_t| <= a_max
    x = np.zeros(2)
    h = 1e-5
    for t in (1, 2, 9):
        oracle = stream.oracle(t)
        num = (oracle.gradient(x + np.array([h, 0.0])) - oracle.gradient(x - np.array([h, 0.0]))) / (2 * h)
        assert abs(num[0]) <= stream.L_f + 1e-6


# --- constraint families --------------------------------------------------------


def sampled_sup(fun, set_, k=4000, seed=1):
    rng = np.random.default_rng(seed)
    X = set_.sample(rng, k)
    return float(np.max(fun(X)))


@pytest.mark.parametrize("set_", [
    Box(lower=[-1.0, -0.5], upper=[0.8, 1.2]),
    Ball(center=[0.2, -0.1], radius=1.1),
])
def test_linear_family_bounds_are_honest(set_):
    A = np.array([[1.0, 1.0], [-0.7, 0.4]])
    b = np.array([0.9, 1.1])
    cons = linear_constraints(A, b, set_, slater_point=[-0.2, -0.2])
    assert sampled_sup(lambda X: np.linalg.norm(X @ A.T - b, axis=1), set_) <= cons.nu_g + 1e-9
    assert float(np.max(np.linalg.norm(A, axis=1))) <= cons.kappa_g + 1e-12
    assert cons.all_convex


def test_linear_family_on_simplex_uses_vertices():
    simplex = Simplex(dim=3)
    A = np.array([[2.0, -1.0, 0.5]])
    b = np.array([0.4])
    cons = linear_constraints(A, b, simplex, slater_point=[0.0, 0.9, 0.1])
    vert_sup = float(np.max(np.abs(A @ np.eye(3) - b)))
    assert cons.nu_g == pytest.approx(max(vert_sup, cons.slater_margin))


def test_ball_family_bounds_are_honest():
    box = Box(lower=[-1.0, -1.0], upper=[1.0, 1.0])
    cons = ball_constraints(centers=[[0.5, 0.5]], radii=[1.2], set_=box,
                            slater_point=[0.3, 0.3])
    norm_sup = sampled_sup(lambda X: np.abs(cons.value(X))[:, 0], box)
    assert norm_sup <= cons.nu_g + 1e-9
    jac_sup = sampled_sup(lambda X: np.linalg.norm(X - np.array([0.5, 0.5]), axis=1), box)
    assert jac_sup <= cons.kappa_g + 1e-9


def test_sine_family_shapes_and_flags():
    box = Box(lower=[-2.0, -2.0], upper=[2.0, 2.0])
    cons = sine_constraints(offsets=[0.1, -0.2], amps=[0.5, 0.3],
                            freqs=[[1.0, 0.0], [0.5, 1.5]], set_=box,
                            slater_point=[-1.4, -1.2])
    assert cons.p == 2
    assert not any(cons.convex_flags)
    x = np.array([0.3, -0.4])
    num = np.zeros((2, 2))
    h = 1e-6
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        num[:, j] = (cons.value(x + e) - cons.value(x - e)) / (2 * h)
    np.testing.assert_allclose(cons.jacobian(x), num, rtol=1e-6, atol=1e-9)


def test_slater_margin_validation():
    box = Box(lower=[-1.0], upper=[1.0])
    with pytest.raises(ValueError, match="slater"):
        linear_constraints([[1.0]], [0.5], box, slater_point=[0.9])


# --- config ---------------------------------------------------------------------


def sample_config_dict():
    return {
        "schema_version": 1,
        "seed": 12345,
        "T": 32,
        "set": {"kind": "box", "lower": [-1.0, -1.0], "upper": [1.0, 1.0]},
        "constraints": {
            "id": "linear",
            "params": {"A": [[1.0, 1.0], [-1.0, 0.5]], "b": [0.8, 0.9],
                       "slater_point": [0.0, 0.0]},
        },
        "stream": {"id": "linear-drift", "params": {"c_scale": 1.0, "bias": [-1.0, -1.0]}},
        "params": {"preset": "custom", "sigma": 0.5, "alpha": 2.0,
                   "theta": {"kind": "scalar", "eta0": 0.5}},
        "x1": "center",
        "output": "out.csv",
    }


def test_config_roundtrip_identity():
    cfg = RunConfig.from_dict(sample_config_dict())
    again = loads(dumps(cfg))
    assert again == cfg
    assert dumps(again) == dumps(cfg)


def test_config_rejects_unknown_keys_everywhere():
    for mutate in (
        lambda d: d.update(extra=1),
        lambda d: d["set"].update(radius=2.0),
        lambda d: d["params"].update(gamma=0.1),
        lambda d: d["params"]["theta"].update(beta=1.0),
        lambda d: d["constraints"].update(extra="x"),
    ):
        d = sample_config_dict()
        mutate(d)
        with pytest.raises((ConfigError, ValueError)):
            cfg = RunConfig.from_dict(d)
            # constraint params are validated when the family is built
            make_constraints({"id": cfg.constraints.id, "params": cfg.constraints.params_dict()},
                             make_set(cfg.set_dict()))


def test_config_rejects_unknown_constraint_param():
    d = sample_config_dict()
    d["constraints"]["params"]["bogus"] = 1
    cfg = RunConfig.from_dict(d)
    with pytest.raises(ValueError, match="unknown keys"):
        make_constraints({"id": cfg.constraints.id, "params": cfg.constraints.params_dict()},
                         make_set(cfg.set_dict()))


def test_config_preset_rules():
    d = sample_config_dict()
    d["params"] = {"preset": "theorem1", "sigma": 0.5}
    with pytest.raises(ConfigError, match="preset"):
        RunConfig.from_dict(d)
    d["params"] = {"preset": "custom"}
    with pytest.raises(ConfigError, match="custom"):
        RunConfig.from_dict(d)
    d["params"] = {"preset": "theorem1"}
    cfg = RunConfig.from_dict(d)
    sigma, alpha = cfg.params.resolve(256)
    assert sigma == pytest.approx(256 ** -0.25)
    assert alpha == pytest.approx(256 ** 0.25)
    d["params"] = {"preset": "prop4"}
    sigma, alpha = RunConfig.from_dict(d).params.resolve(1024)
    assert sigma == pytest.approx(1024 ** -0.5)
    assert alpha == pytest.approx(1024 ** 0.5)


def test_config_seed_validation():
    d = sample_config_dict()
    d["seed"] = -1
    with pytest.raises(ConfigError, match="seed"):
        RunConfig.from_dict(d)
    d["seed"] = 2 ** 64
    with pytest.raises(ConfigError, match="seed"):
        RunConfig.from_dict(d)
    d["seed"] = 2 ** 63  # large u64 values are fine
    RunConfig.from_dict(d)


def test_config_schema_version_enforced():
    d = sample_config_dict()
    d["schema_version"] = 2
    with pytest.raises(ConfigError, match="schema_version"):
        RunConfig.from_dict(d)


def test_config_invalid_json_and_type():
    with pytest.raises(ConfigError):
        loads("not json")
    with pytest.raises(ConfigError):
        loads(json.dumps([1, 2, 3]))


def test_make_set_variants():
    assert isinstance(make_set({"kind": "box", "lower": [0.0], "upper": [1.0]}), Box)
    assert isinstance(make_set({"kind": "ball", "center": [0.0], "radius": 1.0}), Ball)
    assert isinstance(make_set({"kind": "simplex", "dim": 3}), Simplex)
    with pytest.raises(ValueError, match="kind"):
        make_set({"kind": "cone"})


def test_make_stream_rejects_unknown():
    box = Box(lower=[-1.0], upper=[1.0])
    with pytest.raises(ValueError, match="unknown stream"):
        make_stream({"id": "bandit"}, box, seed=0)
    with pytest.raises(ValueError, match="unknown keys"):
        make_stream({"id": "linear-drift", "params": {"c_scale": 1.0, "junk": 2}}, box, seed=0)
