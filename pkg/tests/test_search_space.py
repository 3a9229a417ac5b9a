import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agentmoo.search_space import (
    CATEGORICAL,
    INTEGER,
    ConfigSpace,
    Configuration,
    ParamSpec,
    SpaceError,
    decode,
    default_space,
    encode,
    random_config,
    validate,
)

ROW5 = dict(
    temperature=0.692, top_p=0.384, max_tokens=2972, step_limit=38, cost_limit=6.73, env_timeout=40, llm_timeout=56, prompt_template=3
)


def test_default_space_matches_table(space):
    assert space.n_vars == 8
    assert (space["temperature"].lower, space["temperature"].upper) == (0.0, 1.0)
    assert (space["top_p"].lower, space["top_p"].upper) == (0.1, 1.0)
    assert space["max_tokens"].kind == INTEGER
    assert (space["max_tokens"].lower, space["max_tokens"].upper) == (512, 4096)
    assert (space["step_limit"].lower, space["step_limit"].upper) == (10, 40)
    assert (space["cost_limit"].lower, space["cost_limit"].upper) == (3.0, 10.0)
    assert (space["env_timeout"].lower, space["env_timeout"].upper) == (40, 60)
    assert (space["llm_timeout"].lower, space["llm_timeout"].upper) == (40, 60)
    assert space["prompt_template"].kind == CATEGORICAL
    assert space["prompt_template"].categories == (1, 2, 3)


def test_decode_bounds(space):
    lo = decode(np.zeros(8), space).values
    hi = decode(np.ones(8), space).values
    assert list(lo.values()) == [0.0, 0.1, 512, 10, 3.0, 40, 40, 1]
    assert list(hi.values()) == [1.0, 1.0, 4096, 40, 10.0, 60, 60, 3]


def test_decode_hand_values(space):
    g = np.full(8, 0.5)
    g[0] = 0.692
    g[7] = 0.70
    c = decode(g, space)
    assert c["temperature"] == pytest.approx(0.692)
    assert c["prompt_template"] == 3
    # 0.5 * 30 + 10 = 25 exactly; 0.5 * 3584 + 512 = 2304
    assert c["step_limit"] == 25
    assert c["max_tokens"] == 2304


def test_integer_rounding_is_half_up():
    space = ConfigSpace((ParamSpec("k", INTEGER, 0, 4),))
    assert decode([0.125], space)["k"] == 1  # 0.5 rounds up
    assert decode([0.124], space)["k"] == 0


@pytest.mark.parametrize("genome", [[0.5] * 7, [0.5] * 9, [1.2] + [0.5] * 7, [-0.1] + [0.5] * 7])
def test_decode_rejects_bad_genomes(space, genome):
    with pytest.raises(SpaceError):
        decode(genome, space)


def test_encode_first_integer_bucket_midpoint(space):
    c = space.configuration({**ROW5, "max_tokens": 512})
    g = encode(c, space)
    assert g[2] == pytest.approx(0.25 / 3584)
    assert g[0] == pytest.approx(0.692)


def test_encode_temperature_zero(space):
    c = space.configuration({**ROW5, "temperature": 0.0})
    assert encode(c, space)[0] == 0.0


def test_row5_round_trip(space):
    c = space.configuration(ROW5)
    back = decode(encode(c, space), space)
    assert back.id == c.id
    for name, v in ROW5.items():
        assert back[name] == pytest.approx(v, abs=1e-12)


def test_encode_rejects_out_of_space(space):
    with pytest.raises(SpaceError):
        encode(space.configuration({**ROW5, "step_limit": 240}, baseline=True), space)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=8, max_size=8))
def test_decode_total_and_round_trip(genes):
    space = default_space()
    c = decode(genes, space)
    assert validate(c, space).ok
    back = decode(encode(c, space), space)
    for p in space.params:
        if p.kind == "continuous":
            assert abs(back[p.name] - c[p.name]) <= 1e-12
        else:
            assert back[p.name] == c[p.name]


def test_validate_default_baseline(table2, space):
    default = table2.lookup("default").configuration
    res = validate(default, space, baseline=True)
    assert res.ok
    assert any("step_limit out of range" in v for v in res.violations)
    assert not validate(default, space, baseline=False).ok


def test_validate_row4_clean(table2, space):
    res = validate(table2.lookup("#4").configuration, space)
    assert res.ok and res.violations == []


def test_validate_missing_param(space):
    values = dict(ROW5)
    del values["env_timeout"]
    res = validate(space.configuration(values), space)
    assert not res.ok
    assert "env_timeout: missing param" in res.violations


def test_validate_missing_param_fails_even_for_baseline(space):
    values = dict(ROW5)
    del values["env_timeout"]
    assert not validate(space.configuration(values, baseline=True), space).ok


def test_validate_wrong_kind(space):
    res = validate(Configuration({**ROW5, "max_tokens": "lots"}), space)
    assert not res.ok


def test_random_config_deterministic(space):
    a = random_config(space, np.random.default_rng(7))
    b = random_config(space, np.random.default_rng(7))
    assert a.id == b.id and a.values == b.values


def test_random_configs_in_bounds_and_uniform_templates(space):
    rng = np.random.default_rng(123)
    configs = [random_config(space, rng) for _ in range(1000)]
    assert all(validate(c, space).ok for c in configs)
    counts = np.bincount([c["prompt_template"] for c in configs], minlength=4)[1:]
    assert np.all(np.abs(counts / 1000 - 1 / 3) <= 0.05)


def test_id_stability_and_sensitivity(space):
    a = space.configuration(ROW5)
    b = space.configuration(dict(ROW5))
    assert a.id == b.id and len(a.id) == 16
    assert space.configuration({**ROW5, "top_p": 0.385}).id != a.id
    # float noise below the 6-digit rendering does not change the id
    assert space.configuration({**ROW5, "top_p": 0.384 + 1e-13}).id == a.id


def test_json_shapes(space):
    doc = json.loads(json.dumps(space.to_json()))
    assert [d["name"] for d in doc] == space.names
    assert set(doc[0]) == {"name", "kind", "lower", "upper", "categories", "unit"}
    assert ConfigSpace.from_json(doc) == space
    assert ConfigSpace.from_json(doc).fingerprint() == space.fingerprint()
    c = space.configuration(ROW5)
    cj = c.to_json()
    assert list(cj["values"]) == space.names
    assert Configuration.from_json(json.loads(json.dumps(cj)), space).id == c.id


def test_param_spec_invariants():
    with pytest.raises(SpaceError):
        ParamSpec("x", "continuous", 2.0, 1.0)
    with pytest.raises(SpaceError):
        ParamSpec("x", INTEGER, 0.5, 3)
    with pytest.raises(SpaceError):
        ParamSpec("x", CATEGORICAL)
    with pytest.raises(SpaceError):
        ConfigSpace((ParamSpec("x", INTEGER, 0, 1), ParamSpec("x", INTEGER, 0, 1)))
