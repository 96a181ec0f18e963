import math
from pathlib import Path

import numpy as np
import pytest
import yaml

from subcb.config import Builder, ExperimentConfig, build_experiment, load, loads
from subcb.errors import ConfigError
from subcb.set_function import WidthModel

CONFIGS = sorted((Path(__file__).parent.parent / "configs").glob("*.yaml"))

MINIMAL = """\
horizon: 10
ground_size: 3
rank: 1
model: {kind: modular, weights: [0.5, 0.3, 0.2]}
"""


class TestRoundTrip:
    @pytest.mark.parametrize("path", CONFIGS, ids=lambda p: p.name)
    def test_repo_configs(self, path):
        cfg = load(path)
        again = loads(cfg.dumps(), cfg.base_dir)
        assert again == cfg
        assert again.dumps() == cfg.dumps()

    def test_defaults_filled(self):
        cfg = loads(MINIMAL)
        assert cfg.oracle == {"kind": "truth"}
        assert cfg.matroids["list"] == [{"kind": "uniform", "k": 1}]
        assert cfg.schedule["delta"] == 0.05 and cfg.schedule["rho_min"] == 0.01
        assert cfg.weights["convention"] == "filmus-ward"

    def test_dict_roundtrip(self):
        cfg = loads(MINIMAL)
        assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg


def error_of(text):
    with pytest.raises(ConfigError) as info:
        loads(text, source="cfg.yaml")
    return info.value


class TestErrors:
    def test_line_of_bad_weights(self):
        err = error_of(MINIMAL.replace("[0.5, 0.3, 0.2]", "[0.5, 0.3]"))
        assert err.line == 4 and "model.weights" in str(err)

    def test_unknown_key(self):
        err = error_of(MINIMAL + "colour: blue\n")
        assert err.line == 5 and "colour" in str(err)

    def test_nested_line(self):
        text = MINIMAL + "oracle:\n  kind: finite\n  experts:\n    - {kind: modular, weights: [1, 2, 3]}\n    - {kind: cubic}\n"
        err = error_of(text)
        assert err.line == 9 and "experts[1]" in str(err)

    def test_rank_mismatch(self):
        err = error_of(MINIMAL + "matroids:\n  list:\n    - {kind: uniform, k: 2}\n")
        assert err.line == 7 and "rank" in str(err)

    def test_horizon(self):
        assert error_of(MINIMAL.replace("horizon: 10", "horizon: 0")).line == 1

    def test_rank_above_ground(self):
        assert error_of(MINIMAL.replace("rank: 1", "rank: 4")).line == 3

    def test_algorithm(self):
        err = error_of(MINIMAL + "algorithm: thompson\n")
        assert err.line == 5

    def test_missing_required(self):
        err = error_of("horizon: 10\nground_size: 3\nrank: 1\n")
        assert "model" in str(err)

    def test_yaml_syntax(self):
        err = error_of(MINIMAL + "oracle: {kind: [\n")
        assert err.line is not None

    def test_unknown_family(self):
        err = error_of(MINIMAL.replace("{kind: modular, weights: [0.5, 0.3, 0.2]}",
                                       "{kind: member, family: nope, index: 0}"))
        assert "nope" in str(err)

    def test_theta_norm(self):
        text = MINIMAL.replace(
            "{kind: modular, weights: [0.5, 0.3, 0.2]}",
            "{kind: glm, theta: [1.0, 1.0], base: {kind: modular, weights: [1, 1, 1]}}")
        err = error_of(text + "contexts: {kind: ball, dim: 2}\n")
        assert err.line == 4 and "exceeds 1" in str(err)


class TestBuilders:
    def test_reg_sq_defaults(self):
        cfg = load(CONFIGS[0].parent / "desk_squarecb.yaml")
        assert Builder(cfg).reg_sq(100) == pytest.approx(math.log(16))
        glm = load(CONFIGS[0].parent / "glm_bench.yaml")
        assert Builder(glm).reg_sq(400) == pytest.approx(20.0)
        single = loads(MINIMAL + "oracle: {kind: finite, experts: [{kind: modular, weights: [1, 1, 1]}]}\n")
        assert Builder(single).reg_sq(10) == 1.0

    def test_reg_sq_override(self):
        cfg = loads(MINIMAL + "schedule: {reg_sq: 7.5}\n")
        assert Builder(cfg).reg_sq(10) == 7.5

    def test_vectors_file(self, tmp_path):
        np.savetxt(tmp_path / "vecs.txt", [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]])
        text = MINIMAL.replace("{kind: modular, weights: [0.5, 0.3, 0.2]}",
                               "{kind: width, vectors_file: vecs.txt, k_mc: 50}")
        (tmp_path / "c.yaml").write_text(text)
        cfg = load(tmp_path / "c.yaml")
        model = Builder(cfg).model(cfg.model, ("model",))
        assert isinstance(model, WidthModel) and model.vectors.shape == (3, 2)

    def test_fresh_state_per_seed(self):
        cfg = load(CONFIGS[0].parent / "desk_squarecb.yaml")
        a, b = build_experiment(cfg, 0), build_experiment(cfg, 1)
        assert a.oracle is not b.oracle

    def test_ranking_model(self):
        text = """\
horizon: 5
ground_size: 4
rank: 2
matroids: {list: [{kind: ranking, items: 2}]}
model:
  kind: ranking
  items: 2
  lambdas: [1.0, 0.5]
  f:
    - {kind: modular, weights: [0.3, 0.7]}
    - {kind: modular, weights: [0.3, 0.7]}
"""
        cfg = loads(text)
        assert build_experiment(cfg, 0).env.matroids.matroids[0].kind == "laminar"

    def test_yaml_dump_is_plain(self):
        cfg = load(CONFIGS[0].parent / "desk_squarecb.yaml")
        assert yaml.safe_load(cfg.dumps())["families"]["desk"]["count"] == 16
