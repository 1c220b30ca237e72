import pytest

from etfopt.config import DEFAULT_INI, load_config, strategy_labels
from etfopt.errors import ConfigError
from etfopt.portfolio import ALL_LABELS


def test_defaults():
    cfg = load_config(None)
    assert cfg.window_length == 1008
    assert cfg.confidences == (0.95, 0.99)
    assert cfg.scenario_count == 10_000
    assert cfg.huber_c == 1.345
    assert cfg.k_max is None
    assert sorted(s.label for s in cfg.strategies) == sorted(ALL_LABELS)


def test_template_is_a_complete_config(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text(DEFAULT_INI, encoding="utf-8")
    assert load_config(p).mode == "historical"


def test_relative_paths_and_overrides(tmp_path):
    p = tmp_path / "sub" / "c.ini"
    p.parent.mkdir()
    p.write_text("[data]\nmanifest = m.txt\n[backtest]\nstrategies = EWP, ls_tc99\nwindow_length = 300\n"
                 "[risk]\nconfidences = 0.9\n[tail]\nk_max = 50\n", encoding="utf-8")
    cfg = load_config(p)
    assert cfg.manifest == p.parent / "m.txt"
    assert [s.label for s in cfg.strategies] == ["EWP", "LS_TC99"]
    assert cfg.window_length == 300 and cfg.k_max == 50 and cfg.confidences == (0.9,)


def test_all_expands_by_confidence():
    assert "LO_C90" in strategy_labels((0.9,))
    assert len(strategy_labels((0.95, 0.99))) == 13
    with pytest.raises(ValueError):
        strategy_labels((0.955,))


@pytest.mark.parametrize("text", [
    "[nonsense]\nx = 1\n",
    "[backtest]\nwindow = 10\n",
    "[backtest]\nmode = weekly\n",
    "[backtest]\nwindow_length = many\n",
    "[data]\nreturn_kind = percent\n",
    "[backtest]\nstrategies = LO_XYZ\n",
])
def test_bad_configs(tmp_path, text):
    p = tmp_path / "bad.ini"
    p.write_text(text, encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(p)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.ini")
