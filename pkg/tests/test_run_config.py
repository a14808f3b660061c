import pytest

from domain.kds.errors import InvalidInputError
from domain.kds_cli.run_config import RunConfig, parse, parse_values, preset_values, resolve, serialize


def test_default_config_round_trips():
    config = RunConfig()
    assert parse(serialize(config)) == config


def test_custom_config_round_trips():
    config = RunConfig(command="benchmark", out="runs/x", seed=7, noise=0.1, lam=0.1, lambda_sweep=(0.5, 5.0),
                       alpha=0.01, learn_alpha=True, k=2, grid=(100, 200, 400), data="data.csv",
                       deterministic=False, final_encode_T=40)
    assert parse(serialize(config)) == config


def test_serialized_file_uses_lambda_key():
    text = serialize(RunConfig(m=24, lam=5.0, T=15))
    assert "lambda = 5.0\n" in text
    assert "m = 24\n" in text
    assert "T = 15\n" in text
    assert "noise = none\n" in text
    assert "lam =" not in text


def test_parse_skips_comments_and_blank_lines():
    values = parse_values("# trainer\n\nm = 8\nlambda = 0.5\nlearn_alpha = true\ngrid = 10, 20\n")
    assert values == {"m": 8, "lam": 0.5, "learn_alpha": True, "grid": (10, 20)}


@pytest.mark.parametrize("text", ["m = eight\n", "colour = red\n", "learn_alpha = yes\n", "just text\n"])
def test_parse_rejects_bad_lines(text):
    with pytest.raises(InvalidInputError):
        parse_values(text)


def test_precedence_preset_file_flags():
    config = resolve("fit", {"preset": "mnist5", "m": 100, "epochs": 3}, {"epochs": 5, "T": None})
    assert config.T == 100             # preset
    assert config.lam == 0.5           # preset
    assert config.m == 100             # file over preset
    assert config.epochs == 5          # flag over file
    assert config.command == "fit"


def test_flag_preset_overrides_file_preset():
    config = resolve("fit", {"preset": "mnist5"}, {"preset": "yaleb"})
    assert config.preset == "yaleb"
    assert config.lam == 0.1


def test_resolve_validates():
    with pytest.raises(InvalidInputError):
        resolve("fit", {}, {"mode": "laplacian"})
    with pytest.raises(InvalidInputError):
        resolve("fit", {}, {"T": 0})
    with pytest.raises(InvalidInputError):
        preset_values("cifar")


def test_batch_size_is_clamped_to_dataset(caplog):
    config = RunConfig(batch_size=10000)
    assert config.train_config(n=500).batch_size == 500
    assert "exceeds" in caplog.text
    assert config.train_config(lam=0.3).encoder.lam == 0.3
