import pytest

from selfevoc.config import ConfigError, RunConfig, load_config, parse_lines


def test_defaults():
    cfg = RunConfig()
    assert (cfg.m, cfg.lr, cfg.delta, cfg.n_max, cfg.batch) == (1.4, 0.001, 1e-5, 20, 256)
    assert cfg.ae_hidden == (500, 100) and cfg.eps_smooth == 0.05


def test_parse_lines():
    vals = parse_lines(["# header", "", "seed = 3  # trailing", "ae_hidden=64,32"])
    assert vals == {"seed": "3", "ae_hidden": "64,32"}
    with pytest.raises(ConfigError, match="line 1"):
        parse_lines(["no equals sign"])


def test_file_then_overrides(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text("seed = 3\nm = 1.1\ncheckpoints = no\n")
    cfg = load_config(path, ["seed=7"])
    assert cfg.seed == 7 and cfg.m == 1.1 and cfg.checkpoints is False


def test_unknown_key_lists_valid_keys():
    with pytest.raises(ConfigError) as exc:
        load_config(None, ["sed=1"])
    assert "sed" in str(exc.value) and "seed" in str(exc.value)


@pytest.mark.parametrize("override", ["m=1", "eta0=0", "eta0=1.5", "delta=0", "n_max=0",
                                      "K=1", "seed=abc", "checkpoints=maybe", "seed=1.5",
                                      "projection=umap", "data_format=hdf5"])
def test_invalid_values(override):
    with pytest.raises(ConfigError):
        load_config(None, [override])


def test_snapshot_round_trip(tmp_path):
    cfg = RunConfig(seed=5, lr=0.1 + 0.2, ae_hidden=(7, 3), dbscan_eps=0.25)
    path = tmp_path / "snap"
    path.write_text(cfg.snapshot())
    back = load_config(path)
    assert back == cfg and back.snapshot() == cfg.snapshot()
    assert RunConfig(dbscan_eps="AUTO").dbscan_eps == "auto"


def test_replace():
    assert RunConfig().replace(K=10).K == 10
