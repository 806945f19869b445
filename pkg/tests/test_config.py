import pytest
import yaml

from hicontrast.config import RunConfig, from_dict, load, loads, parse_m_list
from hicontrast.errors import ConfigError


def test_defaults_validate():
    cfg = RunConfig().validate()
    assert cfg.geometry.dimension == 2
    assert cfg.cell_geometry().inclusion.radius == 0.3


def test_yaml_roundtrip():
    cfg = loads("geometry: {dimension: 3}\ndefect: {radius: 0.8, a2: 2.0}\n")
    again = loads(cfg.dump())
    assert again == cfg
    assert again.content_hash() == cfg.content_hash()


def test_hash_changes_with_content():
    a = loads("defect: {a2: 1.0}")
    b = loads("defect: {a2: 1.5}")
    assert a.content_hash() != b.content_hash()


def test_overrides(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text(yaml.safe_dump({"defect": {"radius": 0.5}}))
    cfg = load(p, ["defect.radius=0.75", "modes.m_list=[0, 2]", "validation.eps_list=[0.1, 0.05]"])
    assert cfg.defect.radius == 0.75
    assert cfg.m_values() == [0, 2]
    assert cfg.validation.eps_list == (0.1, 0.05)


@pytest.mark.parametrize("text, path", [
    ("geometry: {inclusion: {radius: 0.5}}", "geometry.inclusion.radius"),
    ("geometry: {colour: red}", "geometry.colour"),
    ("beta: {method: magic}", "beta.method"),
    ("beta: {k_max: -1}", "beta.k_max"),
    ("validation: {eps_list: [0.1, 0.2]}", "validation.eps_list"),
    ("geometry: {dimension: two}", "geometry.dimension"),
    ("modes: {m_list: 'all'}", "modes.m_list"),
    ("defect: {radius: -1.0}", ""),
])
def test_invalid_configs(text, path):
    with pytest.raises(ConfigError) as exc:
        loads(text)
    assert path in str(exc.value)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load(tmp_path / "nope.yaml")


def test_bad_override_syntax():
    with pytest.raises(ConfigError):
        load(None, ["defect.radius"])


def test_auto_m_list():
    assert parse_m_list("auto 0..2", 2) == [0, 1, 2]
    assert parse_m_list("auto 0..1", 3) == [0.5, 1.5]
    with pytest.raises(ConfigError):
        parse_m_list([0.5], 2)


def test_from_dict_none():
    assert from_dict(None) == RunConfig()
