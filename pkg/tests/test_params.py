import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from annuflow.errors import DomainError, ParameterError
from annuflow.params import PhysicalConfig, metric_coefficient, to_dimensionless


@pytest.mark.parametrize(
    "d, dT, R, R_tol, Ma, Ma_tol",
    [
        (0.002, 6.4, 2228, 1, 51, 1),
        (0.008, 1.84, 40995, 50, 59, 1),
        (0.002, 20.41, 7105, 10, 163, 1),
    ],
)
def test_reference_mappings(d, dT, R, R_tol, Ma, Ma_tol):
    g = to_dimensionless(PhysicalConfig(d=d, dT=dT))
    assert abs(g.R - R) <= R_tol
    assert abs(g.Ma - Ma) <= Ma_tol


def test_group_fields():
    g = to_dimensionless(PhysicalConfig(dT=6.4, dT_h=3.2))
    assert g.delta_star == pytest.approx(10.0)
    assert g.a_star == pytest.approx(5.0)
    assert g.A == pytest.approx(0.2)
    assert g.ratio_h == pytest.approx(0.5)


@pytest.mark.parametrize("r, expected", [(-1.0, 0.2), (1.0, 0.004 / 0.06), (0.0, 0.1)])
def test_metric_coefficient_examples(r, expected):
    g = to_dimensionless(PhysicalConfig())
    assert metric_coefficient(g, r) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("r", [-1.0000001, 1.5, math.nan])
def test_metric_coefficient_domain(r):
    with pytest.raises(DomainError):
        metric_coefficient(to_dimensionless(PhysicalConfig()), r)


@pytest.mark.parametrize("field", ["a", "delta", "d", "dT"])
@pytest.mark.parametrize("bad", [0.0, -1.0, math.inf])
def test_invalid_geometry_names_field(field, bad):
    with pytest.raises(ParameterError) as info:
        to_dimensionless(PhysicalConfig(**{field: bad}))
    assert info.value.field == field


def test_negative_biot_and_dT_h_rejected():
    for field in ("biot", "dT_h"):
        with pytest.raises(ParameterError):
            to_dimensionless(PhysicalConfig(**{field: -0.1}))


def test_dT_h_may_exceed_dT():
    assert to_dimensionless(PhysicalConfig(dT=1.0, dT_h=5.0)).ratio_h == 5.0


positive = st.floats(1e-4, 1.0, allow_nan=False)


@given(a=positive, delta=positive, d=positive, dT=st.floats(0.01, 50.0), r=st.floats(-1.0, 1.0))
def test_mapped_radius_identity(a, delta, d, dT, r):
    g = to_dimensionless(PhysicalConfig(a=a, delta=delta, d=d, dT=dT))
    G = metric_coefficient(g, r)
    assert 1.0 / G == pytest.approx(g.a_star + g.delta_star * (r + 1) / 2, rel=1e-12)
    assert g.Ma / g.R == pytest.approx(9.2e-8 / d**2, rel=1e-12)


@given(a=positive, delta=positive, d=positive)
def test_G_positive_decreasing(a, delta, d):
    g = to_dimensionless(PhysicalConfig(a=a, delta=delta, d=d))
    vals = metric_coefficient(g, np.linspace(-1, 1, 33))
    assert np.all(vals > 0)
    assert np.all(np.diff(vals) < 0)


@given(ds=st.floats(0.5, 20.0))
def test_fixed_hardware_aspect(ds):
    g = to_dimensionless(PhysicalConfig().with_delta_star(ds))
    assert g.a_star == pytest.approx(g.delta_star / 2, rel=1e-12)
    assert g.delta_star == pytest.approx(ds, rel=1e-12)
