"""Catalog of spacetimes and field configurations, and its self-checks."""

import numpy as np
import pytest

from emtkit.catalog import (
    SCENARIOS,
    SPACETIMES,
    CatalogClaimError,
    Scenario,
    Spacetime,
    random_tensor_field,
    random_vector_field,
    sample_points,
    scenario_box,
    spacetime,
    verify_scenario_claims,
    verify_spacetime_claims,
)
from emtkit.fieldtheory import scalar_theory
from emtkit.geometry import VectorField, evaluate, geometry_at
from emtkit.jets import jet_stack
from emtkit.tensors import value_array


@pytest.mark.parametrize("name", sorted(SPACETIMES))
def test_spacetime_claims_hold(name):
    verify_spacetime_claims(SPACETIMES[name], seed=1)


@pytest.mark.parametrize("name", sorted(SCENARIOS))
def test_scenario_claims_hold(name):
    verify_scenario_claims(SCENARIOS[name], seed=1)


def test_expected_symmetry_counts():
    # full flat-space symmetry algebra in four dimensions, and the
    # time/axial/rotation generators outside a spherical mass
    assert len(SPACETIMES["minkowski4"].killing) == 10
    assert len(SPACETIMES["minkowski2"].killing) == 3
    assert len(SPACETIMES["schwarzschild"].killing) == 4
    assert all(v.claimed_killing for st in SPACETIMES.values()
               for v in st.killing)


def test_sampling_is_deterministic():
    box = SPACETIMES["minkowski4"].box
    a = sample_points(box, 20, seed=9)
    b = sample_points(box, 20, seed=9)
    c = sample_points(box, 20, seed=10)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    lo = np.array([x[0] for x in box])
    hi = np.array([x[1] for x in box])
    assert np.all(a >= lo) and np.all(a <= hi)


def test_random_fields_are_deterministic():
    box = SPACETIMES["minkowski2"].box
    pts = sample_points(box, 7, seed=0)
    frame = geometry_at(SPACETIMES["minkowski2"].metric, pts, 2)
    f1 = evaluate(random_tensor_field(("u", "d"), box, seed=5), frame)
    f2 = evaluate(random_tensor_field(("u", "d"), box, seed=5), frame)
    f3 = evaluate(random_tensor_field(("u", "d"), box, seed=6), frame)
    assert np.array_equal(value_array(f1), value_array(f2))
    assert not np.array_equal(value_array(f1), value_array(f3))
    v = evaluate(random_vector_field(box, seed=5), frame)
    assert v.variance == ("u",)


def test_scenario_box_override():
    # the point-charge configuration is singular at the origin, so its
    # sampling box is pushed away from the hole in the potential
    sc = SCENARIOS["coulomb-4d"]
    box = scenario_box(sc)
    assert box != spacetime(sc.spacetime).box
    r2min = sum(min(lo * lo, hi * hi) for lo, hi in box[1:])
    assert r2min > 0.5


def test_unknown_spacetime_name():
    with pytest.raises(KeyError):
        spacetime("nope")


def test_false_killing_claim_caught():
    st = SPACETIMES["minkowski2"]

    def shear(coords):
        t, x = coords
        return jet_stack([0.0 * t, x * x])

    liar = VectorField(fn=shear, name="liar", claimed_killing=True)
    fake = Spacetime(st.metric, st.box, killing=st.killing + (liar,))
    with pytest.raises(CatalogClaimError):
        verify_spacetime_claims(fake, seed=1)


def test_false_parallel_claim_caught():
    st = SPACETIMES["schwarzschild"]
    # static time translation is Killing but not parallel
    timelike = next(v for v in st.killing if v.claimed_killing)
    liar = VectorField(fn=timelike.fn, name="liar",
                       claimed_killing=True, claimed_parallel=True)
    fake = Spacetime(st.metric, st.box, killing=(liar,))
    with pytest.raises(CatalogClaimError):
        verify_spacetime_claims(fake, seed=1)


def test_false_on_shell_claim_caught():
    blob = SCENARIOS["scalar-blob-2d"]
    fake = Scenario(name="fake", spacetime=blob.spacetime, theory=blob.theory,
                    fields=blob.fields, on_shell=True)
    with pytest.raises(CatalogClaimError):
        verify_scenario_claims(fake, seed=1)


def test_false_off_shell_claim_caught():
    wave = SCENARIOS["scalar-wave-2d"]
    fake = Scenario(name="fake", spacetime=wave.spacetime, theory=wave.theory,
                    fields=wave.fields, on_shell=False)
    with pytest.raises(CatalogClaimError):
        verify_scenario_claims(fake, seed=1)


def test_on_shell_scenarios_cover_both_theories():
    names = [n for n, sc in SCENARIOS.items() if sc.on_shell]
    theories = {SCENARIOS[n].theory.name.split("(")[0] for n in names}
    assert {"scalar", "maxwell"} <= theories


def test_gauge_fields_flagged():
    for name, sc in SCENARIOS.items():
        if sc.gauge_field is not None:
            assert sc.gauge_field in sc.fields
            assert sc.fields[sc.gauge_field].variance == ("d",)
