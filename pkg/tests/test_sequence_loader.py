"""Tests de lectura/escritura de modelos y secuencias"""
import json
from pathlib import Path

import numpy as np
import pytest

from hmmqp.exceptions import InvalidModel
from hmmqp.core.model import DiscreteOutputModel, GaussianOutputModel
from hmmqp.preprocessing.sequence_loader import SEQUENCE_HEADER, SequenceLoader


class TestModels:

    def test_builtin_name(self):
        spec = SequenceLoader.load_model("toy4")
        assert spec.n == 4

    def test_save_and_load(self, discrete3, tmp_path):
        path = SequenceLoader.save_model(discrete3, tmp_path / "models" / "d3.json")
        spec = SequenceLoader.load_model(path)
        np.testing.assert_array_equal(spec.outputs.B, discrete3.outputs.B)
        np.testing.assert_array_equal(spec.A.entries, discrete3.A.entries)

    def test_instance_model_file(self):
        spec = SequenceLoader.load_model(Path(__file__).parent.parent / "instances" / "toy4" / "models" / "toy4.json")
        assert isinstance(spec.outputs, GaussianOutputModel)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            SequenceLoader.load_model(tmp_path / "missing.json")

    def test_wrong_extension(self, tmp_path):
        path = tmp_path / "model.yaml"
        path.write_text("A: []", encoding="utf-8")
        with pytest.raises(InvalidModel):
            SequenceLoader.load_model(path)

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(InvalidModel):
            SequenceLoader.load_model(path)

    def test_unknown_output_type(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text(json.dumps({"A": [[1.0]], "outputs": {"type": "poisson"}}), encoding="utf-8")
        with pytest.raises(InvalidModel):
            SequenceLoader.load_model(path)

    def test_load_outputs_from_bare_schema(self, tmp_path):
        path = SequenceLoader.save_json(
            {"type": "gaussian", "components": [{"mu": 0.0, "sigma2": 1.0}, {"mu": 3.0, "sigma2": 2.0}]},
            tmp_path / "fit.json",
        )
        outputs = SequenceLoader.load_outputs(path)
        assert outputs.components == ((0.0, 1.0), (3.0, 2.0))

    def test_load_outputs_from_model_file(self, discrete3, tmp_path):
        path = SequenceLoader.save_model(discrete3, tmp_path / "d3.json")
        assert isinstance(SequenceLoader.load_outputs(path), DiscreteOutputModel)


class TestSequences:

    def test_continuous_values_are_exact(self, tmp_path):
        y = np.random.default_rng(0).normal(size=50)
        path = SequenceLoader.save_sequence(y, tmp_path / "y.txt", "continuous")
        kind, sequences = SequenceLoader.load_sequence(path)
        assert kind == "continuous"
        np.testing.assert_array_equal(sequences[0], y)

    def test_independent_blocks(self, tmp_path):
        blocks = [np.array([0, 1, 2]), np.array([3, 3])]
        path = SequenceLoader.save_sequence(blocks, tmp_path / "y.txt", "discrete")
        kind, sequences = SequenceLoader.load_sequence(path)
        assert kind == "discrete"
        assert len(sequences) == 2
        np.testing.assert_array_equal(sequences[1], [3, 3])

    def test_header_is_written(self, tmp_path):
        path = SequenceLoader.save_sequence(np.array([1, 0]), tmp_path / "y.txt", "discrete")
        assert path.read_text(encoding="utf-8").splitlines()[0] == f"{SEQUENCE_HEADER} discrete"

    def test_bad_header(self, tmp_path):
        path = tmp_path / "y.txt"
        path.write_text("# hmm-seq v2 discrete\n0\n1\n", encoding="utf-8")
        with pytest.raises(InvalidModel):
            SequenceLoader.load_sequence(path)

    def test_headerless_integers_are_discrete(self, tmp_path):
        path = tmp_path / "y.txt"
        path.write_text("0\n1\n0\n1\n1\n", encoding="utf-8")
        kind, sequences = SequenceLoader.load_sequence(path)
        assert kind == "discrete"
        assert sequences[0].dtype == np.int64
        np.testing.assert_array_equal(sequences[0], [0, 1, 0, 1, 1])

    def test_headerless_floats_are_continuous(self, tmp_path):
        path = tmp_path / "y.txt"
        path.write_text("0.5\n-1\n2.25\n\n3e-1\n", encoding="utf-8")
        kind, sequences = SequenceLoader.load_sequence(path)
        assert kind == "continuous"
        assert len(sequences) == 2
        np.testing.assert_array_equal(sequences[0], [0.5, -1.0, 2.25])
        np.testing.assert_array_equal(sequences[1], [0.3])

    def test_headerless_non_numeric_value(self, tmp_path):
        path = tmp_path / "y.txt"
        path.write_text("0.5\nabc\n", encoding="utf-8")
        with pytest.raises(InvalidModel):
            SequenceLoader.load_sequence(path)

    def test_non_numeric_value(self, tmp_path):
        path = tmp_path / "y.txt"
        path.write_text(f"{SEQUENCE_HEADER} discrete\n0\nx\n", encoding="utf-8")
        with pytest.raises(InvalidModel):
            SequenceLoader.load_sequence(path)

    def test_empty_body(self, tmp_path):
        path = tmp_path / "y.txt"
        path.write_text(f"{SEQUENCE_HEADER} continuous\n", encoding="utf-8")
        with pytest.raises(InvalidModel):
            SequenceLoader.load_sequence(path)

    def test_unknown_kind_on_save(self, tmp_path):
        with pytest.raises(ValueError):
            SequenceLoader.save_sequence(np.zeros(3), tmp_path / "y.txt", "binary")
