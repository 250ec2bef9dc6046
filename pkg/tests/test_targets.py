import math

import numpy as np
import pytest

from smtm import (
    ExpTail,
    Gaussian,
    PolyTail,
    ProductIID,
    StudentT,
    fisher_moment,
    parse_target,
)
from smtm.errors import ConfigError, DimensionMismatch, OutOfRange
from smtm.rng import chain_rng
from smtm.targets import component_cdf, log_density


def test_gaussian_component_values():
    g = Gaussian(2.0, 4.0)
    assert g.log_pdf(2.0) == 0.0
    assert g.log_pdf(4.0) == -0.5
    assert g.fisher_moment() == 0.25
    # two-sided 2.5% quantile of the standard normal
    assert math.isclose(Gaussian().cdf(1.959964), 0.9750000009035577, rel_tol=1e-14)
    with pytest.raises(OutOfRange):
        Gaussian(0.0, 0.0)


def test_student_component_values():
    t = StudentT(1.0)
    assert math.isclose(t.log_pdf(1.0), -math.log(2.0), rel_tol=1e-15)
    t3 = StudentT(3.0)
    assert math.isclose(t3.score(2.0), -8.0 / 7.0, rel_tol=1e-15)
    assert StudentT(11.0).cdf(0.0) == 0.5
    assert math.isclose(StudentT(11.0, 3.0, 2.0).cdf(3.0), 0.5, rel_tol=1e-12)
    with pytest.raises(OutOfRange):
        StudentT(0.0)
    with pytest.raises(OutOfRange):
        StudentT(3.0, 0.0, -1.0)


def test_student_fisher_moment_closed_form():
    # E[score^2] = (dof+1) / ((dof+3) scale^2), independent of location
    cases = [
        (3.0, 0.0, 1.0, 2.0 / 3.0),
        (11.0, 0.0, 1.0, 6.0 / 7.0),
        (21.0, 0.0, 1.0, 11.0 / 12.0),
        (11.0, 0.0, 2.0, 3.0 / 14.0),
        (5.0, 0.0, 0.7, 6.0 / (8.0 * 0.49)),
    ]
    for dof, loc, scale, want in cases:
        got = fisher_moment(StudentT(dof, loc, scale))
        assert math.isclose(got, want, rel_tol=1e-9), (dof, loc, scale, got, want)
    shifted = fisher_moment(StudentT(11.0, 5.0, 1.0))
    assert math.isclose(shifted, 6.0 / 7.0, rel_tol=1e-9)


def test_product_log_density_shapes():
    target = ProductIID(Gaussian(0.0, 1.0), 3)
    x = np.array([1.0, 2.0, 2.0])
    v = target.log_density(x)
    assert isinstance(v, float) and v == -4.5
    batch = target.log_density(np.stack([x, np.zeros(3)]))
    assert batch.shape == (2,)
    assert batch[0] == -4.5 and batch[1] == 0.0
    assert log_density(target, x) == v
    with pytest.raises(DimensionMismatch):
        target.log_density(np.zeros(4))
    with pytest.raises(DimensionMismatch):
        target.log_density(np.zeros((2, 4)))


def test_product_mean_and_sampling():
    rng = chain_rng(13, 0)
    target = ProductIID(StudentT(11.0, 10.0, 1.0), 20)
    assert np.array_equal(target.mean(), np.full(20, 10.0))
    one = target.sample(rng)
    assert one.shape == (20,)
    many = target.sample(rng, 4000)
    assert many.shape == (4000, 20)
    # dof 11, scale 1: component variance is 11/9
    assert abs(many.mean() - 10.0) < 0.05
    assert abs(many.var() - 11.0 / 9.0) < 0.1


def test_isotropic_tails():
    p = PolyTail(21.0, 10)
    assert p.log_density(np.zeros(10)) == 0.0
    x = np.full(10, 1e6)
    # -(alpha/2) log(1 + |x|^2): finite and huge, not overflowed
    v = p.log_density(x)
    assert np.isfinite(v) and v < -300.0
    e = ExpTail(0.5, 3)
    assert e.log_density(np.array([4.0, 0.0, 0.0])) == -2.0
    with pytest.raises(OutOfRange):
        PolyTail(20.0, 10)
    with pytest.raises(OutOfRange):
        ExpTail(1.5, 3)
    with pytest.raises(OutOfRange):
        ExpTail(0.0, 3)


def test_component_cdf_passthrough():
    comp = StudentT(11.0)
    t = np.linspace(-3.0, 3.0, 7)
    assert np.array_equal(component_cdf(comp, t), comp.cdf(t))


def test_parse_target_grammar():
    t1 = parse_target("gaussian(0.5, 0.75)^200")
    assert isinstance(t1, ProductIID) and t1.d == 200
    assert t1.component == Gaussian(0.5, 0.75)
    t2 = parse_target(" student_t( 11 , 0 , 1 ) ^ 10 ")
    assert t2.component == StudentT(11.0, 0.0, 1.0) and t2.d == 10
    t3 = parse_target("poly_tail(21, 10)")
    assert t3 == PolyTail(21.0, 10)
    t4 = parse_target("exp_tail(0.5, 3)")
    assert t4 == ExpTail(0.5, 3)


def test_parse_target_rejects_malformed_specs():
    bad = [
        "gaussian(0,1)",          # missing ^d
        "gaussian(0)^3",          # wrong arity
        "student_t(11,0,1)",      # missing ^d
        "poly_tail(21,10)^2",     # power not allowed
        "exp_tail(2,3)",          # beta out of range
        "poly_tail(5,10)",        # alpha <= 2d
        "cauchy(0,1)^3",          # unknown family
        "gaussian(a,b)^3",        # non-numeric args
        "gaussian(0,1)^(3)",      # malformed power
        "",
    ]
    for spec in bad:
        with pytest.raises(ConfigError):
            parse_target(spec)
