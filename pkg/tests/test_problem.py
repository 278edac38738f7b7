import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from starcovert import detection, oracle, qos, validation
from starcovert.model import SystemParams, sample_channels
from starcovert.problem import (baseline_ris_instance, covert_rate, eval_and_grad, eval_f,
                                grad_f, is_feasible, make_instance)


@pytest.fixture(scope="module")
def inst():
    params = SystemParams()
    return make_instance(params, sample_channels(params, 777))


def _reference_f(inst, x):
    """Rebuild f from the link-level and detection-level modules."""
    p = inst.params
    bf, prof = inst.decode(x)
    gains = qos.link_gains(inst.channels, prof, bf)
    a = detection.asymptotic_params(inst.channels, prof, bf, p)
    return np.array([
        -qos.rate_bb(gains, p),
        bf.power - p.P_max,
        1.0 - detection.dep_lower_bound(a) - p.epsilon,
        p.R_star - qos.rate_cc(gains, p, qos.sigma_star(p.kappa, p)),
    ])


def test_eval_f_against_module_composition(inst):
    rng = np.random.default_rng(0)
    for _ in range(100):
        x = inst.random_start(rng)
        ref = _reference_f(inst, x)
        f = eval_f(inst, x)
        assert f == pytest.approx(ref, rel=1e-9, abs=1e-12)


def test_zero_power_corner(inst):
    x = validation.interior_point(inst, np.random.default_rng(1))
    s = inst.layout.slices
    x[s["omega_b"]] = 0.0
    x[s["omega_c"]] = 0.0
    f, G = eval_and_grad(inst, x)
    p = inst.params
    assert f[0] == 0.0
    assert f[1] == -p.P_max
    assert f[2] == -p.epsilon
    assert f[3] == p.R_star
    assert np.all(np.isfinite(G))


def test_power_gradient_closed_form(inst):
    x = validation.interior_point(inst, np.random.default_rng(2))
    G = grad_f(inst, x)
    s = inst.layout.slices
    expected = np.zeros(inst.n)
    expected[s["omega_b"]] = 2 * x[s["omega_b"]]
    expected[s["omega_c"]] = 2 * x[s["omega_c"]]
    assert np.array_equal(G[1], expected)


def test_covertness_independent_of_phases(inst):
    x = validation.interior_point(inst, np.random.default_rng(3))
    G = grad_f(inst, x)
    mask = inst.layout.phase_mask
    assert np.all(G[2, mask] == 0.0)


@pytest.mark.parametrize("block", ["phase_b", "phase_c", "phi_r", "phi_t"])
def test_global_phase_invariance(inst, block):
    rng = np.random.default_rng(4)
    x = validation.interior_point(inst, rng)
    sl = inst.layout.slices[block]
    y = x.copy()
    y[sl] = np.mod(y[sl] + 1.234, 2 * np.pi)
    assert eval_f(inst, y) == pytest.approx(eval_f(inst, x), rel=1e-10, abs=1e-13)
    # the gradient along a common shift is zero
    G = grad_f(inst, x)
    scale = np.max(np.abs(G), axis=1) + 1e-300
    assert np.all(np.abs(G[:, sl].sum(axis=1)) <= 1e-8 * scale)


def test_gradient_against_finite_differences(inst):
    rng = np.random.default_rng(5)
    for _ in range(5):
        x = validation.interior_point(inst, rng)
        err = validation.gradient_rel_error(grad_f(inst, x), oracle.fd_gradient(inst, x))
        assert np.max(err) < 1e-5


def test_baseline_gradient_against_finite_differences(inst):
    base = baseline_ris_instance(inst)
    x = validation.interior_point(base, np.random.default_rng(6))
    free = base.x_max > base.x_min          # pinned splits are not variables
    G, G_fd = grad_f(base, x)[:, free], oracle.fd_gradient(base, x)[:, free]
    err = validation.gradient_rel_error(G, G_fd)
    assert np.max(err) < 1e-5


def test_baseline_box_inside_star_box(inst):
    base = baseline_ris_instance(inst)
    assert np.all(base.x_min >= inst.x_min)
    assert np.all(base.x_max <= inst.x_max)
    sl = inst.layout.slices["beta_r"]
    assert np.array_equal(base.x_min[sl], base.x_max[sl])
    n_r = inst.params.N // 2
    assert np.all(base.x_min[sl][:n_r] == inst.x_max[sl][:n_r])
    assert np.all(base.x_min[sl][n_r:] == inst.x_min[sl][n_r:])


def test_baseline_odd_split_rejected():
    params = SystemParams(N=31)
    inst = make_instance(params, sample_channels(params, 1))
    with pytest.raises(ValueError):
        baseline_ris_instance(inst, 0.5)


def test_all_reflective_has_no_public_rate():
    params = SystemParams(N=10)
    inst = make_instance(params, sample_channels(params, 2), beta_floor=0.0)
    base = baseline_ris_instance(inst, reflect_ratio=1.0)
    x = base.random_start(np.random.default_rng(0))
    f = eval_f(base, x)
    assert f[3] == params.R_star


def test_length_mismatch(inst):
    with pytest.raises(ValueError):
        eval_f(inst, np.zeros(inst.n + 1))


def test_transformed_objective(inst):
    f = np.array([-1.0, 0.5, -0.2, 0.1])
    assert inst.transformed_objective(f) == pytest.approx(-1.0 + 1e4 * 0.6)


@given(st.lists(st.floats(-1, 1), min_size=3, max_size=3), st.floats(0, 1e-5))
def test_is_feasible(g, tol):
    f = np.array([0.0] + g)
    assert is_feasible(f, tol) == all(v <= tol for v in g)


def test_covert_rate_sign(inst):
    x = inst.random_start(np.random.default_rng(7))
    assert covert_rate(inst, x) == -eval_f(inst, x)[0] >= 0


def test_bound_tracks_average_dep():
    # 1 - f_2 - epsilon is a lower bound on the averaged minimum DEP
    params = SystemParams()
    inst = make_instance(params, sample_channels(params, 8))
    rng = np.random.default_rng(8)
    for _ in range(5):
        x = validation.interior_point(inst, rng)
        bf, prof = inst.decode(x)
        a = detection.asymptotic_params(inst.channels, prof, bf, params)
        lb = 1.0 - (eval_f(inst, x)[2] + params.epsilon)
        assert lb <= detection.avg_min_dep_numeric(a) + 1e-9
        assert math.isclose(lb, detection.dep_lower_bound(a), abs_tol=1e-12)
