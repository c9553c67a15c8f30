import json

import numpy as np
import pytest

from taxed_ruin import ConfigError
from taxed_ruin.config import RunConfig, expand_grid

BASE = {
    "model": {"variant": "CramerLundberg", "drift": 1.5, "jump_rate": 1.0, "claims": [[1.0, 1.0]]},
    "tax": {"x": 2.0, "pieces": [[0.0, 0.2], [3.0, 0.5]]},
    "query": {"functional": "exit", "q": [0.0, 0.05], "a": {"start": 3, "stop": 8, "num": 6}},
    "sim": {"n_paths": 1000, "rng_seed": 3},
}


def test_grid_forms():
    np.testing.assert_array_equal(expand_grid(0.5, "q"), [0.5])
    np.testing.assert_array_equal(expand_grid([1, 2], "q"), [1.0, 2.0])
    np.testing.assert_allclose(expand_grid({"start": 0, "stop": 1, "num": 3}, "q"), [0, 0.5, 1])
    for bad in (True, "x", {"start": 0}, [1, "a"], {"start": 0, "stop": 1, "num": 0}):
        with pytest.raises(ConfigError):
            expand_grid(bad, "query.q")


@pytest.mark.parametrize("path", ["exit", "exit_constant", "gs_box", "gs_density", "npv", "scale",
                                  "verify_quick"])
def test_round_trip(path):
    import pathlib
    cfg = RunConfig.load(pathlib.Path(__file__).parent.parent / "configs" / f"{path}.json")
    again = RunConfig.loads(cfg.dumps())
    assert again == cfg
    assert again.dumps() == cfg.dumps()


def test_round_trip_inline():
    cfg = RunConfig.from_dict(BASE)
    assert RunConfig.loads(cfg.dumps()) == cfg
    assert cfg.x == 2.0
    np.testing.assert_allclose(cfg.query.grid("a"), np.linspace(3, 8, 6))


def _bad(mutate):
    d = json.loads(json.dumps(BASE))
    mutate(d)
    with pytest.raises(ConfigError) as err:
        RunConfig.from_dict(d)
    return str(err.value)


def test_field_paths_in_errors():
    assert _bad(lambda d: d.update(extra={})).startswith("extra")
    assert _bad(lambda d: d["query"].update(functional="nope")).startswith("query.functional")
    assert _bad(lambda d: d["query"].update(bogus=1)).startswith("query.bogus")
    assert _bad(lambda d: d["query"].update(x=3.0)).startswith("query.x")
    assert _bad(lambda d: d["query"].update(a={"start": 1})).startswith("query.a")
    assert _bad(lambda d: d["sim"].update(n_paths=0)).startswith("sim")
    assert _bad(lambda d: d["model"].update(drift=-1.0)).startswith("model")
    assert _bad(lambda d: d["tax"].update(pieces=[[0.0, 1.0]])).startswith("tax")
    assert _bad(lambda d: d["model"].pop("drift")).startswith("model")
    assert _bad(lambda d: d.update(output={"tolerance": 0})).startswith("output.tolerance")


def test_invalid_json():
    with pytest.raises(ConfigError):
        RunConfig.loads("{not json")
    with pytest.raises(ConfigError):
        RunConfig.loads("[]")
    with pytest.raises(ConfigError):
        RunConfig.load("/nonexistent/run.json")


def test_require_query():
    d = json.loads(json.dumps(BASE))
    del d["query"]["a"]
    with pytest.raises(ConfigError, match="query.a"):
        RunConfig.from_dict(d).require_query()
    with pytest.raises(ConfigError, match="model"):
        RunConfig().require_query()
