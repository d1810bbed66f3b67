import pytest

from conftest import DATA
from jordanhydro.config import ConfigError, load_config, parse_config
from jordanhydro.expr import to_text


def base(**extra):
    raw = {"blocks": [3], "vector_field": ["u1 - eps*u1", "u2", "u3"],
           "parameters": {"eps": 3.0}, "solver": {"base_point": [1, 1, 0.5]}}
    raw.update(extra)
    return raw


@pytest.mark.parametrize("path", sorted(DATA.glob("*.toml")), ids=lambda p: p.stem)
def test_bundled_configs_load(path):
    cfg = load_config(path)
    assert len(cfg.vector_field) == cfg.bs.n
    assert list(cfg.blocks) == sorted(cfg.blocks, reverse=True)


def test_bundled_jb3_sections():
    cfg = load_config(DATA / "jb3.toml")
    assert cfg.parameters == {"eps1": 3.0}
    assert set(cfg.symmetries.initial_data) == {(1, 1), (2, 1), (3, 1)}
    assert cfg.metric.step == 0.005
    assert [lab for lab, _ in cfg.hodograph.symmetries] == ["a", "b", "d"]
    assert len(cfg.hodograph.x.values()) == 41


def test_blocks_are_sorted_and_relabelled():
    raw = {"blocks": [1, 2], "vector_field": ["3 + u1", "u2 + u1", "1 + u1_1"],
           "symmetries": {"targets": [[3.2, 1.1, 0.4]],
                          "initial_data": {"1(1)": "u1", "1(2)": "u2_2", "2(2)": "1"}},
           "solver": {"base_point": [3.0, 1.0, 0.5]}}
    cfg = parse_config(raw)
    assert cfg.blocks == (2, 1) and cfg.permutation == (2, 1)
    # old u1 (block 1) becomes u3, old u2, u3 (block 2) become u1, u2
    assert [to_text(e) for e in cfg.vector_field] == ["u1+u3", "1+u3", "3+u3"]
    assert cfg.solver.base_point == (1.0, 0.5, 3.0)
    assert cfg.symmetries.targets == ((1.1, 0.4, 3.2),)
    assert set(cfg.symmetries.initial_data) == {(1, 1), (2, 1), (1, 2)}


@pytest.mark.parametrize("raw, fragment", [
    ({"vector_field": ["u1"]}, "missing 'blocks'"),
    (base(blocks=[0]), "blocks"),
    (base(vector_field=["u1", "u2"]), "expected 3 components"),
    (base(vector_field=["u1 +", "u2", "u3"]), "byte offset 4"),
    (base(vector_field=["u1", "u2", 3]), "quoted strings"),
    (base(parameters={"eps": "x"}), "not a finite number"),
    (base(solver={"step": -1}), "must be positive"),
    (base(check={"box": [[1, 0], [0, 1], [0, 1]]}), "lo < hi"),
    (base(symmetries={"targets": [[1, 1, 1]], "initial_data": {"1(1)": "u1"}}), "no data for"),
    (base(symmetries={"targets": [[1, 1, 1]], "initial_data": {"4(1)": "u1"}}), "does not exist"),
    (base(symmetries={"targets": [[1, 1, 1]], "initial_data": {"x": "u1"}}), "i(alpha)"),
    (base(metric={"targets": [[1, 1, 1]]}), "either flat_family or initial_data"),
    (base(metric={"targets": [[1, 1, 1]], "flat_family": {"F1": "u1"}}), "exactly the keys"),
    (base(hodograph={"x": {"start": 0, "step": 0.1, "count": 3}}), "missing table 't'"),
    (base(jb3={"theta_F1": "u1 +"}), "jb3.theta_F1"),
])
def test_errors(raw, fragment):
    with pytest.raises(ConfigError) as info:
        parse_config(raw)
    assert fragment in str(info.value)


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("blocks = [3\n")
    with pytest.raises(ConfigError):
        load_config(bad)
