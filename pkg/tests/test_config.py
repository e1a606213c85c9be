import pytest

from wct.config import DEFAULTS, Config, ConfigError, load_config, parse_config


def test_defaults_echo_round_trip():
    cfg = Config()
    text = cfg.to_text()
    assert len(text.splitlines()) == len(DEFAULTS)
    assert "glcm.angles = 0,45,90,135" in text and "cv.stratified = true" in text
    assert parse_config(text) == cfg


def test_parse_values_and_comments():
    cfg = parse_config("# header\nseed = 9  # trailing\nsvm.C=100\ncv.stratified = no\nglcm.angles = 0, 90\n\n")
    assert cfg["seed"] == 9 and cfg["svm.C"] == 100.0 and cfg["cv.stratified"] is False
    assert cfg["glcm.angles"] == (0, 90)
    assert cfg["ga.population_size"] == 30


@pytest.mark.parametrize("text,match", [
    ("bogus = 1", "unknown key"),
    ("seed = x", "bad value"),
    ("seed 3", "expected"),
    ("cv.stratified = maybe", "bad value"),
])
def test_parse_errors_name_line(text, match):
    with pytest.raises(ConfigError, match=match) as exc:
        parse_config("\n" + text, "run.cfg")
    assert "run.cfg:2" in str(exc.value)


def test_with_values():
    cfg = Config().with_values(svm__C=5.0, seed=None)
    assert cfg["svm.C"] == 5.0 and cfg["seed"] == 0
    with pytest.raises(ConfigError):
        Config().with_values(nope=1)


def test_load_config(tmp_path):
    assert load_config(None) == Config()
    (tmp_path / "a.cfg").write_text("seed = 4\n")
    assert load_config(tmp_path / "a.cfg")["seed"] == 4
    with pytest.raises(ConfigError, match="missing.cfg"):
        load_config(tmp_path / "missing.cfg")


def test_environment_is_ignored(monkeypatch):
    monkeypatch.setenv("WCT_SEED", "123")
    assert load_config(None)["seed"] == 0
