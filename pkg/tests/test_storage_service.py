import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from semispec.models.errors import GeneratorFormatError, SchemaError
from semispec.models.schemas import GeneratorSpec, Instance, ResidualEntry, ResidualReport


def test_load_matrix_market(storage, fixture_path):
    spec = storage.load_generator(fixture_path("jordan2.mtx"))
    assert spec.name == "jordan2"
    assert_allclose(spec.A, [[0.0, 1.0], [0.0, 0.0]])


def test_matrix_market_error_names_the_line(storage, fixture_path):
    with pytest.raises(GeneratorFormatError, match="line 4"):
        storage.load_generator(fixture_path("bad_entry.mtx"))


def test_matrix_market_entry_count(storage, tmp_path):
    path = tmp_path / "short.mtx"
    path.write_text("%%MatrixMarket matrix coordinate real general\n2 2 3\n1 1 1.0\n")
    with pytest.raises(GeneratorFormatError, match="declared 3 entries, found 1"):
        storage.load_generator(str(path))


def test_load_json(storage, fixture_path):
    spec = storage.load_generator(fixture_path("diag_minus1_minus2.json"))
    assert spec.name == "diag12"
    assert_allclose(spec.A, np.diag([-1.0, -2.0]))


def test_json_schema_error_names_the_field(storage, fixture_path):
    with pytest.raises(SchemaError, match="field 'dim'"):
        storage.load_generator(fixture_path("missing_dim.json"))


def test_json_dim_mismatch(storage, tmp_path):
    path = tmp_path / "mismatch.json"
    path.write_text(json.dumps({"name": "m", "dim": 3, "matrix": [[[1, 0], [0, 0]], [[0, 0], [1, 0]]]}))
    with pytest.raises(SchemaError, match="dim is 3"):
        storage.load_generator(str(path))


def test_invalid_json_reports_a_line(storage, tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "name": "x",\n  "dim": \n}\n')
    with pytest.raises(GeneratorFormatError, match="line 4"):
        storage.load_generator(str(path))


def test_missing_file(storage, tmp_path):
    with pytest.raises(GeneratorFormatError, match="cannot read"):
        storage.load_generator(str(tmp_path / "absent.json"))


def test_save_and_load_generator(storage, tmp_path):
    A = np.array([[0.1, -2.5 + 1e-17j], [1.0 / 3.0, 3j]])
    path = storage.save_generator(str(tmp_path / "gen" / "g.json"), GeneratorSpec(name="g", A=A, description="d"))
    loaded = storage.load_generator(path)
    assert loaded.name == "g" and loaded.description == "d"
    assert np.array_equal(loaded.A, A)


def test_save_and_load_every_zoo_generator(storage, zoo, tmp_path):
    for entry in zoo.zoo_entries():
        spec = zoo.builtin(entry.name, entry.params)
        loaded = storage.load_generator(storage.save_generator(str(tmp_path / f"{entry.name}.json"), spec))
        assert loaded.name == spec.name
        assert np.array_equal(loaded.A, spec.A), entry.name


def test_save_report_uses_pass_alias(storage, tmp_path):
    report = ResidualReport(report="r", instance=Instance(generator="g"),
                            entries=[ResidualEntry.check("x", 0.0, 1.0, 1e-10)])
    path = storage.save_report(storage.resolve("r.json"), report)
    text = open(path).read()
    assert '"pass": true' in text
    assert path.startswith(str(tmp_path))


def test_build_manifest(storage):
    manifest = storage.build_manifest("zoo", 7, {"rank_tol": 1e-10}, config={"check": True})
    assert manifest.seed == 7
    assert manifest.rng == "PCG64"
    assert set(manifest.versions) == {"python", "numpy", "scipy", "semispec"}
    assert manifest.created_at.endswith("+00:00")
    assert manifest.tolerances == {"rank_tol": 1e-10}
