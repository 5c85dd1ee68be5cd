import numpy as np
import pytest

from occsearch import (
    ConfigurationError,
    DegenerateResponse,
    OracleUnstable,
    UnsupportedBackend,
    ValidationError,
)
from occsearch.circuit import load_circuit
from occsearch.hyperspace import ConfigurationPoint
from occsearch.synthetic import (
    SyntheticCircuit,
    affine,
    base_responses,
    corner_transform,
    dip_centre,
    multimodal,
    oracle_extrema,
    read_extrema,
    ridge,
    write_extrema,
)

FLIPPED = """\
[circuit]
name = flipped

[oc:x1]
min = 0
max = 1

[oc:x2]
min = 0
max = 1

[corner:process]
labels = up, down
valid = 0 0, 0 1
up = 0 0
down = 0 1

[response:r]
function = affine
threshold = 0
direction = lower

[coefficients:r]
up = 1 {shift}
down = -2 0
"""


def test_base_functions_at_the_origin():
    zero = np.zeros((1, 7))
    assert multimodal(zero)[0] == pytest.approx(1.85189932407377, abs=1e-9)
    assert ridge(zero)[0] == pytest.approx(6.00268280104373, abs=1e-9)
    assert affine(zero)[0] == 5.0


def test_ridge_only_sees_the_weighted_projection():
    u = np.array([[0.1, 0.4, 0.7, 0.9, 0.2, 0.3, 0.5]])
    swapped = u[:, [3, 1, 2, 0, 4, 5, 6]]
    assert ridge(swapped)[0] == pytest.approx(ridge(u)[0], abs=1e-12)


def test_base_functions_are_finite_on_the_box():
    u = np.random.default_rng(0).uniform(size=(10000, 7))
    u[:10] = np.round(u[:10])
    for f in (multimodal, ridge, affine):
        assert np.all(np.isfinite(f(u)))


def test_corner_transform():
    assert corner_transform([5.0], [(2.0, 3.0)])[0] == 13.0
    values = corner_transform([1.0, 2.0], [(1.0, 0.0), (-1.0, 0.5)])
    assert values.tolist() == [1.0, -1.5]


def test_evaluate_applies_the_corner(circuit_7d):
    circuit = SyntheticCircuit(circuit_7d)
    nominal = circuit.evaluate(ConfigurationPoint((0.0,) * 7, (0, 0)))
    assert nominal[0] == pytest.approx(1.85189932407377, abs=1e-9)
    assert nominal[2] == 5.0
    ss = circuit.evaluate(ConfigurationPoint((0.0,) * 7, (0, 1)))
    assert ss[0] == pytest.approx(1.05 * nominal[0] - 0.12, abs=1e-12)
    assert ss[1] == pytest.approx(0.97 * nominal[1] + 0.35, abs=1e-12)
    assert ss[2] == pytest.approx(1.03 * 5.0 - 0.45, abs=1e-12)
    base = base_responses(circuit, ConfigurationPoint((0.0,) * 7, (0, 1)))
    assert base == pytest.approx(nominal, abs=1e-12)


def test_evaluate_validates_the_point(circuit_7d):
    circuit = SyntheticCircuit(circuit_7d)
    with pytest.raises(ValidationError):
        circuit.evaluate(ConfigurationPoint((1.5,) + (0.0,) * 6, (0, 0)))
    with pytest.raises(ValidationError):
        circuit.corner_coefficients("tt")


def test_external_circuits_are_not_synthetic():
    with pytest.raises(UnsupportedBackend):
        SyntheticCircuit(load_circuit("regulator"))


def test_synthetic_responses_need_a_function(write_circuit):
    content = FLIPPED.format(shift=0).replace("function = affine\n", "")
    with pytest.raises(ConfigurationError):
        SyntheticCircuit(load_circuit(write_circuit(content)))


@pytest.mark.parametrize(
    "old, new",
    [
        ("down = -2 0\n", ""),
        ("down = -2 0", "down = 0 1"),
        ("down = -2 0", "down = -2 0\nsideways = 1 0"),
    ],
)
def test_invalid_coefficients(write_circuit, old, new):
    content = FLIPPED.format(shift=0).replace(old, new)
    with pytest.raises(ConfigurationError):
        SyntheticCircuit(load_circuit(write_circuit(content)))


def test_oracle_finds_affine_vertices(circuit_2d):
    found = oracle_extrema(SyntheticCircuit(circuit_2d), 201, 201)
    r3 = found["r3"]
    # ss and sg tie at the minimum.
    assert r3.minimum == pytest.approx(3.4125, abs=1e-9)
    assert r3.argmin.oc_values == (0.0, 1.0)
    assert circuit_2d.corner_label(r3.argmin) in ("ss", "sg")
    assert r3.maximum == pytest.approx(0.96 * 6.0 + 0.55, abs=1e-9)
    assert r3.argmax.oc_values == (1.0, 0.0)
    assert circuit_2d.corner_label(r3.argmax) == "ff"

    r2 = found["r2"]
    assert r2.minimum == pytest.approx(0.9 * 6.00268280104373 + 0.4, abs=1e-6)
    assert circuit_2d.corner_label(r2.argmin) == "sf"
    assert r2.worst(circuit_2d.spec("r2")) == r2.maximum
    assert r3.worst(circuit_2d.spec("r3")) == r3.minimum


def test_oracle_follows_translation_and_negative_scale(write_circuit):
    circuit = SyntheticCircuit(
        load_circuit(write_circuit(FLIPPED.format(shift=0)))
    )
    shifted = SyntheticCircuit(
        load_circuit(write_circuit(FLIPPED.format(shift=10), "shifted.cfg"))
    )
    found = oracle_extrema(circuit, 5, 9)["r"]
    # affine(x1, x2) = 5 + x1 - 1.25 x2 + 0.3 x1 x2 lies in [3.75, 6].
    assert found.minimum == -12.0
    assert circuit.model.corner_label(found.argmin) == "down"
    assert found.argmin.oc_values == (1.0, 0.0)
    assert found.maximum == 6.0
    assert circuit.model.corner_label(found.argmax) == "up"

    moved = oracle_extrema(shifted, 5, 9)["r"]
    assert moved.minimum == -12.0
    assert moved.maximum == 16.0
    assert moved.range == found.range + 10.0


def test_oracle_rejects_tiny_grids(circuit_2d):
    with pytest.raises(ValidationError):
        oracle_extrema(SyntheticCircuit(circuit_2d), 1)


def test_oracle_rejects_constant_response(write_circuit):
    circuit = SyntheticCircuit(
        load_circuit(write_circuit(FLIPPED.format(shift=0)))
    )
    circuit.functions = [lambda u: np.zeros(len(np.atleast_2d(u)))]
    with pytest.raises(DegenerateResponse):
        oracle_extrema(circuit, 3, 3, polish=False)


def test_oracle_reports_unsettled_extrema(circuit_2d, monkeypatch):
    monkeypatch.setattr("occsearch.synthetic.STABILITY", -1.0)
    with pytest.raises(OracleUnstable) as e:
        oracle_extrema(SyntheticCircuit(circuit_2d), 5, 9)
    assert e.value.density == 9


def test_multimodal_minimum_lies_at_the_dip(circuit_7d):
    centre = dip_centre(7)
    assert centre.tolist() == [0.72, 0.28, 0.72, 0.28, 0.72, 0.28, 0.72]
    # Coarse grids miss the dip; the polished extrema still agree.
    found = oracle_extrema(SyntheticCircuit(circuit_7d), 5, 5)["r1"]
    assert found.minimum == pytest.approx(1.1 * -0.5459 - 0.13, abs=2e-3)
    assert circuit_7d.corner_label(found.argmin) == "sg"


def test_extrema_file_round_trip(tmp_path, write_circuit):
    model = load_circuit(write_circuit(FLIPPED.format(shift=0)))
    found = oracle_extrema(SyntheticCircuit(model), 5, 9)
    path = str(tmp_path / "extrema.yaml")
    write_extrema(path, model, found)
    again = read_extrema(path, model)
    assert again == found
    assert "version: 1" in (tmp_path / "extrema.yaml").read_text()


def test_bad_extrema_files(tmp_path, circuit_2d):
    path = tmp_path / "extrema.yaml"
    with pytest.raises(ConfigurationError):
        read_extrema(str(path), circuit_2d)
    path.write_text("version: 2\n")
    with pytest.raises(ConfigurationError):
        read_extrema(str(path), circuit_2d)
    path.write_text("version: 1\nresponses: {}\n")
    with pytest.raises(ConfigurationError):
        read_extrema(str(path), circuit_2d)


@pytest.mark.slow
@pytest.mark.timeout(600)
def test_oracle_on_the_seven_dimensional_benchmark(circuit_7d):
    found = oracle_extrema(SyntheticCircuit(circuit_7d))
    label = circuit_7d.corner_label

    r1 = found["r1"]
    assert r1.minimum == pytest.approx(1.1 * -0.5459 - 0.13, abs=2e-3)
    assert label(r1.argmin) == "sg"

    r2 = found["r2"]
    assert r2.minimum == pytest.approx(0.9 * 6.00268280104373 + 0.4, abs=1e-6)
    assert r2.maximum == pytest.approx(1.06 * 13.9973171990 - 0.2, abs=1e-6)
    assert label(r2.argmax) == "fs"

    r3 = found["r3"]
    assert r3.minimum == pytest.approx(1.07 * -0.25 - 0.6, abs=1e-9)
    assert r3.argmin.oc_values == (0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0)
    assert r3.maximum == pytest.approx(1.1 * 12.0 - 0.3, abs=1e-9)
    assert label(r3.argmax) == "sf"
