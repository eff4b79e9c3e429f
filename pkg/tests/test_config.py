import pytest

from confspec.config import build_grid, config_hash, load_config, resolve_coupling
from confspec.errors import ConfigError


def write(tmp_path, text):
    p = tmp_path / "cfg.yaml"
    p.write_text(text)
    return p


MINIMAL_SPECTRUM = """
grid:
  shape: [8, 8, 8]
metric:
  recipe: flat
"""


def test_minimal_spectrum_config_fills_defaults(tmp_path):
    cfg = load_config(write(tmp_path, MINIMAL_SPECTRUM), "spectrum")
    assert cfg["operator"]["coupling"] == "yamabe"
    assert cfg["operator"]["window"] == 8
    assert cfg["kernel"]["tau"] is None
    assert cfg["seed"] == 0
    grid = build_grid(cfg["grid"])
    assert grid.shape == (8, 8, 8)
    assert grid.period == (1.0, 1.0, 1.0)


def test_unknown_key_rejected(tmp_path):
    p = write(tmp_path, MINIMAL_SPECTRUM + "\nbogus: 1\n")
    with pytest.raises(ConfigError, match="unknown key 'bogus'"):
        load_config(p, "spectrum")


def test_nested_unknown_key_rejected(tmp_path):
    p = write(tmp_path, MINIMAL_SPECTRUM + "\noperator:\n  wat: 2\n")
    with pytest.raises(ConfigError, match="operator.wat"):
        load_config(p, "spectrum")


def test_missing_required_key(tmp_path):
    p = write(tmp_path, "metric:\n  recipe: flat\n")
    with pytest.raises(ConfigError, match="grid.shape"):
        load_config(p, "spectrum")


def test_type_checking(tmp_path):
    p = write(tmp_path, "grid:\n  shape: [8,8,8]\n  order: fast\nmetric:\n  recipe: flat\n")
    with pytest.raises(ConfigError, match="order"):
        load_config(p, "spectrum")


def test_range_checking(tmp_path):
    p = write(tmp_path, "grid:\n  shape: [8,8,8]\n  order: 3\nmetric:\n  recipe: flat\n")
    with pytest.raises(ConfigError, match="out of range"):
        load_config(p, "spectrum")


def test_bad_recipe_rejected(tmp_path):
    p = write(tmp_path, "grid:\n  shape: [8,8,8]\nmetric:\n  recipe: hyperbolic\n")
    with pytest.raises(ConfigError, match="recipe"):
        load_config(p, "spectrum")


def test_malformed_yaml(tmp_path):
    p = write(tmp_path, "grid: [unclosed\n")
    with pytest.raises(ConfigError, match="malformed YAML"):
        load_config(p, "spectrum")


BREAK_TEMPLATE = """
grid:
  shape: [8, 8, 8]
metric:
  recipe: flat
coupling: {c}
"""


@pytest.mark.parametrize("c", [0, 0.0, 0.5])
def test_kernel_breaking_command_rejects_excluded_couplings(tmp_path, c):
    p = write(tmp_path, BREAK_TEMPLATE.format(c=c))
    with pytest.raises(ConfigError, match="c != 0, c != 1/2"):
        load_config(p, "break-kernel")


def test_kernel_breaking_command_accepts_other_couplings(tmp_path):
    p = write(tmp_path, BREAK_TEMPLATE.format(c=20.0))
    cfg = load_config(p, "break-kernel")
    assert cfg["coupling"] == 20.0
    assert cfg["break"]["eps"] == 0.5
    assert cfg["search"]["enabled"] is False


def test_resolve_coupling():
    assert resolve_coupling("yamabe", 3) == pytest.approx(1.0 / 8.0)
    assert resolve_coupling(2.5, 3) == 2.5
    with pytest.raises(ConfigError):
        resolve_coupling("conformal", 3)


def test_config_hash_stable(tmp_path):
    p = write(tmp_path, MINIMAL_SPECTRUM)
    assert config_hash(p) == config_hash(p)
    q = tmp_path / "other.yaml"
    q.write_text(MINIMAL_SPECTRUM + "\nseed: 3\n")
    assert config_hash(p) != config_hash(q)


def test_product_config_requires_fiber_data(tmp_path):
    p = write(tmp_path, "fiber:\n  k: 3\n  eps: 0.05\n")
    with pytest.raises(ConfigError, match="sweep.t_stop"):
        load_config(p, "product")


def test_unknown_command():
    with pytest.raises(ConfigError, match="unknown command"):
        load_config("/nonexistent", "optimize")
