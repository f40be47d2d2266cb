import hashlib

import pytest

from phishgraph.config import OUTPUT_DIR_ENV, ConfigError, MissingPathError, RunConfig, parse_assignments
from phishgraph.lbp import DELETE_CYCLES, FIXED_K, SIMILARITY
from phishgraph.seeding import derive_seed, rng_for


def write_conf(tmp_path, text):
    (tmp_path / "urls.csv").write_text("url,label\nhttp://a.com/,0\n")
    p = tmp_path / "run.conf"
    p.write_text(text)
    return p


def test_defaults():
    cfg = RunConfig.from_mapping({})
    assert cfg["lbp.k"] == 6 and cfg["lbp.threshold"] == 0.5
    assert cfg["lbp.strategy"] == DELETE_CYCLES
    assert cfg.edge_spec().mode == SIMILARITY
    assert cfg.edge_spec().ths_plus == 0.6 and cfg.edge_spec().ths_minus == 1.0
    assert cfg.sweep_grid() == [round(i / 10, 1) for i in range(11)]
    assert cfg.positive_label == 0


def test_parse_assignments():
    got = parse_assignments(["# comment", "", "a = 1", " b=x = y  # trailing"])
    assert got == {"a": "1", "b": "x = y"}
    with pytest.raises(ConfigError, match=":2"):
        parse_assignments(["a = 1", "oops"], "f.conf")


def test_load_coerces_and_resolves_paths(tmp_path):
    p = write_conf(tmp_path, "dataset = urls.csv\nlbp.k = 4\nlbp.strategy = fixed_k\nlbp.normalize = no\n")
    cfg = RunConfig.load(p)
    assert cfg["lbp.k"] == 4 and cfg["lbp.normalize"] is False
    assert cfg.inference_config().strategy == FIXED_K
    assert cfg.path("dataset") == tmp_path / "urls.csv"
    cfg.check_paths()


def test_overrides_win(tmp_path):
    p = write_conf(tmp_path, "dataset = urls.csv\nlbp.k = 4\n")
    assert RunConfig.load(p, {"lbp.k": "9"})["lbp.k"] == 9
    assert RunConfig.load(p).with_overrides(lbp__k=3)["lbp.k"] == 3


def test_env_output_dir(tmp_path, monkeypatch):
    p = write_conf(tmp_path, "dataset = urls.csv\noutput_dir = here\n")
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path / "elsewhere"))
    assert RunConfig.load(p).path("output_dir") == tmp_path / "elsewhere"


@pytest.mark.parametrize("mapping", [
    {"no.such.key": "1"}, {"lbp.k": "six"}, {"lbp.k": "0"}, {"n_folds": "1"}, {"edge.mode": "cosine"},
    {"prior.source": "svm"}, {"sweep.grid": ""}, {"lbp.normalize": "maybe"}, {"baseline.kinds": "svm"},
    {"sim.kernel": "dot"}, {"edge.epsilon": "0.7"},
])
def test_invalid(mapping):
    with pytest.raises(ConfigError):
        RunConfig.from_mapping(mapping)


def test_missing_paths(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.from_mapping({}).check_paths()
    cfg = RunConfig.from_mapping({"dataset": "nope.csv"}, tmp_path)
    with pytest.raises(MissingPathError):
        cfg.check_paths()


def test_dump_round_trip(tmp_path):
    cfg = RunConfig.from_mapping({"lbp.k": 3, "lbp.normalize": False})
    p = tmp_path / "eff.conf"
    p.write_text(cfg.dump())
    assert RunConfig.load(p).values == cfg.values


def test_seed_derivation():
    want = int.from_bytes(hashlib.sha256(b"7:folds:0").digest()[:8], "little")
    assert derive_seed(7, "folds") == want
    assert derive_seed(7, "embed", 1) != derive_seed(7, "embed", 2)
    assert rng_for(7, "rf", 3).integers(1 << 30) == rng_for(7, "rf", 3).integers(1 << 30)
