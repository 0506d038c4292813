import pytest

from tvfwi.config import (SCHEMA, ConfigError, defaults, dump_config, frequencies_from_config, parse_config,
                          plan_from_config)

SAMPLE = """
# desk configuration
[grid]
nz = 60
nx = 120
h = 20

[acquisition]
fmin = 3
fmax = 10   # inclusive
encoding = yes
n_super = 2
seed = 4

[objective]
mode = WRI
lambda = 250

[constraints]
vmin = 1400
vmax = 5000

[sgp]
max_outer = 25

[pdhg]
tol = 1e-4

[schedule]
tau_frac = 0.9
xi_frac = 0.01, 0.05, 0.10
"""


def test_parse_and_plan():
    cfg = parse_config(SAMPLE)
    assert cfg["grid"] == {"nz": 60, "nx": 120, "h": 20.0}
    assert frequencies_from_config(cfg) == [3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0]
    plan = plan_from_config(cfg)
    assert plan.mode == "wri" and plan.lam == 250.0
    assert len(plan.passes) == 3
    assert [p.xi_frac for p in plan.passes] == [0.01, 0.05, 0.10]
    assert all(p.tau_frac == 0.9 for p in plan.passes)
    assert plan.encoding.enabled and plan.encoding.seed == 4
    assert plan.sgp.damping_mode == "additive"


def test_fwi_defaults_to_multiplicative_damping():
    plan = plan_from_config(parse_config("[objective]\nmode = fwi\n"))
    assert plan.sgp.damping_mode == "multiplicative"


def test_round_trip_idempotent():
    cfg = parse_config(SAMPLE)
    text = dump_config(cfg)
    assert parse_config(text) == cfg
    assert dump_config(parse_config(text)) == text
    assert parse_config(dump_config(defaults())) == defaults()


def test_every_key_serialized():
    text = dump_config(defaults())
    for sec, keys in SCHEMA.items():
        assert f"[{sec}]" in text
        for k in keys:
            assert f"\n{k} = " in text


@pytest.mark.parametrize("text", [
    "[grid]\nnzz = 3\n",
    "[nonsense]\na = 1\n",
    "[grid]\nnz = three\n",
    "[acquisition]\nencoding = maybe\n",
    "no section header\n",
    "[objective]\nmode = lsq\n",
    "[acquisition]\nfrequencies = 5, 4\n",
])
def test_invalid_configs(text):
    with pytest.raises(ConfigError):
        plan_from_config(parse_config(text))


def test_explicit_frequency_list_and_none():
    cfg = parse_config("[acquisition]\nfrequencies = 3, 4.5, 6\n[sgp]\nc0 = none\n")
    assert frequencies_from_config(cfg) == [3.0, 4.5, 6.0]
    assert cfg["sgp"]["c0"] is None


def test_inline_comments_and_hessian_floor():
    cfg = parse_config("[objective]\nmode = fwi   ; reduced objective\n[sgp]\nhessian_floor = 0.1  # water level\n")
    assert cfg["objective"]["mode"] == "fwi"
    assert plan_from_config(cfg).sgp.hessian_floor == 0.1
    with pytest.raises(ConfigError):
        plan_from_config(parse_config("[sgp]\nhessian_floor = 2\n"))
