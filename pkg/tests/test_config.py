import pytest

from twcpkit.config import DEFAULTS, describe, load, parse_text
from twcpkit.errors import ConfigError


def test_defaults_cover_every_namespace_and_are_documented():
    prefixes = {k.split(".")[0] for k in DEFAULTS if "." in k}
    assert {"clock", "link", "stitch", "ratio", "ippp", "ppp", "stats"} <= prefixes
    assert all(spec.doc for spec in DEFAULTS.values())
    text = describe()
    assert all(f"{k} = " in text for k in DEFAULTS)


def test_described_defaults_parse_back_to_defaults():
    cfg = parse_text(describe())
    assert cfg == {k: v.default for k, v in DEFAULTS.items()}


def test_file_and_overrides(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# comment\nclock.days = 3   # trailing\n\nippp.enabled = yes\nratio.daily_unc = 9.7, 9.1 9.6\n")
    cfg = load(p, ["clock.days=4", "seed=7"])
    assert cfg["clock.days"] == 4.0
    assert cfg["ippp.enabled"] is True
    assert cfg["ratio.daily_unc"] == [9.7, 9.1, 9.6]
    assert cfg["seed"] == 7
    assert cfg.section("clock.a")["white_fm"] == DEFAULTS["clock.a.white_fm"].default


@pytest.mark.parametrize("text,match", [
    ("clock.dayz = 3", "unknown key"),
    ("clock.days = three", "bad float"),
    ("clock.days = inf", "bad float"),
    ("seed = 1.5", "bad int"),
    ("stitch.force = maybe", "bad bool"),
    ("just words", "key = value"),
    ("seed = 1\nseed = 2", "duplicate"),
])
def test_bad_config_lines(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_text(text, "x.cfg")


def test_error_names_file_and_line():
    with pytest.raises(ConfigError, match=r"x\.cfg:2:"):
        parse_text("seed = 1\nnope = 2\n", "x.cfg")


def test_missing_file():
    with pytest.raises(ConfigError):
        load("/nonexistent/run.cfg")
