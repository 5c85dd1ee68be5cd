import itertools

import numpy as np
import pytest

from occsearch import BudgetError, CapabilityError, EmptyDesign
from occsearch.hyperspace import (
    CircuitModel,
    Direction,
    OperatingCondition,
    ResponseSpec,
)
from occsearch.sampling import (
    Provenance,
    evaluation_minimum,
    evaluation_set,
    fixed_planning_set,
    full_factorial,
    latin_hypercube,
    minimum_oa_runs,
    orthogonal_array,
)


def unit_model(d, corner=None):
    return CircuitModel(
        "unit",
        tuple(OperatingCondition("x{}".format(i), 0.0, 1.0) for i in range(d)),
        (ResponseSpec("r", 0.0, Direction.LOWER_BOUND),),
        corner=corner,
    )


@pytest.mark.parametrize("n, d", [(4, 3), (100, 5), (4872, 7)])
def test_latin_hypercube_stratifies_every_dimension(n, d):
    design = latin_hypercube(unit_model(d), n, np.random.default_rng(1))
    assert len(design) == n
    strata = np.floor(design.oc_values * n).astype(int)
    for j in range(d):
        assert sorted(strata[:, j]) == list(range(n))


def test_latin_hypercube_scales_to_oc_ranges(plain_circuit):
    design = latin_hypercube(plain_circuit, 50, np.random.default_rng(0))
    assert np.all(design.oc_values[:, 0] >= 1.0)
    assert np.all(design.oc_values[:, 0] <= 2.0)
    assert np.all(design.oc_values[:, 1] >= -40.0)
    assert np.all(design.oc_values[:, 1] <= 125.0)
    assert set(design.provenance) == {Provenance.LHS}


def test_latin_hypercube_is_deterministic_per_seed():
    model = unit_model(3)
    a = latin_hypercube(model, 20, np.random.default_rng(7))
    b = latin_hypercube(model, 20, np.random.default_rng(7))
    c = latin_hypercube(model, 20, np.random.default_rng(8))
    assert np.array_equal(a.oc_values, b.oc_values)
    assert not np.array_equal(a.oc_values, c.oc_values)


def test_latin_hypercube_rejects_empty_design():
    with pytest.raises(EmptyDesign):
        latin_hypercube(unit_model(2), 0, np.random.default_rng(0))


@pytest.mark.parametrize("d", range(1, 11))
def test_full_factorial_has_all_vertices(d):
    design = full_factorial(unit_model(d), 2)
    assert len(design) == 2 ** d
    assert set(np.unique(design.oc_values)) == {0.0, 1.0}
    assert len({tuple(row) for row in design.oc_values}) == 2 ** d


def test_full_factorial_uses_exact_bounds(plain_circuit):
    design = full_factorial(plain_circuit, 2)
    assert sorted(set(design.oc_values[:, 1])) == [-40.0, 125.0]
    assert sorted(set(design.oc_values[:, 0])) == [1.0, 2.0]


def test_full_factorial_cap():
    with pytest.raises(BudgetError) as e:
        full_factorial(unit_model(3), 2, cap=4)
    assert e.value.requested == 8


def test_orthogonal_array_is_pairwise_balanced():
    design = orthogonal_array(unit_model(7), 8)
    assert len(design) == 8
    values = design.oc_values
    for j in range(7):
        assert sorted(values[:, j]) == [0.0] * 4 + [1.0] * 4
    for i, j in itertools.combinations(range(7), 2):
        pairs = [tuple(p) for p in values[:, [i, j]]]
        for combination in itertools.product([0.0, 1.0], repeat=2):
            assert pairs.count(combination) == 2


def test_orthogonal_array_l4():
    values = orthogonal_array(unit_model(3), 4).oc_values
    for i, j in itertools.combinations(range(3), 2):
        pairs = {tuple(p) for p in values[:, [i, j]]}
        assert len(pairs) == 4


def test_orthogonal_array_of_two_factors_is_the_full_factorial():
    model = unit_model(2)
    oa = {tuple(p) for p in orthogonal_array(model, 4).oc_values}
    ff = {tuple(p) for p in full_factorial(model, 2).oc_values}
    assert oa == ff


def test_orthogonal_array_capability():
    with pytest.raises(CapabilityError) as e:
        orthogonal_array(unit_model(3), 6)
    assert e.value.suggestion == 8
    with pytest.raises(CapabilityError) as e:
        orthogonal_array(unit_model(8), 8)
    assert e.value.suggestion == 16
    assert "16" in str(e.value)


def test_minimum_oa_runs():
    assert minimum_oa_runs(unit_model(1)) == 4
    assert minimum_oa_runs(unit_model(3)) == 4
    assert minimum_oa_runs(unit_model(7)) == 8
    assert minimum_oa_runs(unit_model(8)) == 16


def test_fixed_planning_set_counts(circuit_7d):
    design = fixed_planning_set(circuit_7d, 100, np.random.default_rng(0))
    assert len(design) == 100
    assert design.count(Provenance.OA) == 8
    assert design.count(Provenance.LHS) == 92
    labels = [circuit_7d.corner_label(p) for p in design.points]
    counts = {label: labels.count(label) for label in circuit_7d.corner.labels}
    assert sorted(counts.values()) == [16, 16, 17, 17, 17, 17]
    assert labels[:6] == list(circuit_7d.corner.labels)


def test_fixed_planning_set_is_deterministic(circuit_2d):
    a = fixed_planning_set(circuit_2d, 30, np.random.default_rng(3))
    b = fixed_planning_set(circuit_2d, 30, np.random.default_rng(3))
    assert a.points == b.points


def test_fixed_planning_budget():
    with pytest.raises(BudgetError):
        fixed_planning_set(unit_model(2), 7, np.random.default_rng(0))
    with pytest.raises(BudgetError) as e:
        fixed_planning_set(unit_model(8), 10, np.random.default_rng(0))
    assert e.value.limit == 16


def test_evaluation_set_7d(circuit_7d):
    design = evaluation_set(circuit_7d, 5000, np.random.default_rng(0))
    assert len(design) == 5000
    assert design.count(Provenance.FULL_FACTORIAL) == 128 * 6
    assert design.count(Provenance.LHS) == 5000 - 128 * 6
    codes = {tuple(c) for c in design.corner_codes}
    assert codes == set(circuit_7d.corner.codes)


def test_evaluation_set_pure_full_factorial():
    design = evaluation_set(unit_model(2), 4, np.random.default_rng(0))
    assert len(design) == 4
    assert set(design.provenance) == {Provenance.FULL_FACTORIAL}


def test_evaluation_set_below_full_factorial():
    with pytest.raises(BudgetError):
        evaluation_set(unit_model(3), 7, np.random.default_rng(0))


def test_deduplication_keeps_first_occurrence():
    model = unit_model(2)
    ff = full_factorial(model, 2)
    design = ff.concat(ff).deduplicated()
    assert len(design) == 4
    assert np.array_equal(design.oc_values, ff.oc_values)


def test_normalized_design_includes_corner(circuit_2d):
    design = fixed_planning_set(circuit_2d, 12, np.random.default_rng(0))
    unit = design.normalized()
    assert unit.shape == (12, 4)
    assert unit.min() >= 0.0 and unit.max() <= 1.0


def test_design_csv(tmp_path, circuit_2d):
    design = fixed_planning_set(circuit_2d, 8, np.random.default_rng(0))
    path = tmp_path / "design.csv"
    design.to_csv(str(path))
    lines = path.read_text().splitlines()
    assert lines[0] == "x1,x2,corner,provenance"
    assert len(lines) == 9
    assert lines[1].endswith(",nominal,OA")


def test_evaluation_set_has_every_vertex_at_every_corner(circuit_2d):
    assert evaluation_minimum(circuit_2d) == 4 * 6
    design = evaluation_set(circuit_2d, 64, np.random.default_rng(0))
    assert len(design) == 64
    pairs = {
        (point.oc_values, point.corner_code)
        for point, tag in zip(design.points, design.provenance)
        if tag is Provenance.FULL_FACTORIAL
    }
    assert len(pairs) == 24
    assert ((1.0, 1.0), (1, 1)) in pairs
    with pytest.raises(BudgetError):
        evaluation_set(circuit_2d, 23, np.random.default_rng(0))
