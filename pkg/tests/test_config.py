"""INI settings loading, validation, and chain construction from settings."""

import pytest

from lamperti.config import (ChainSettings, ConfigError, RunSettings,
                             build_chain, load_settings)


def write_ini(tmp_path, text):
    p = tmp_path / "run.ini"
    p.write_text(text)
    return p


def test_defaults():
    rs = RunSettings()
    assert rs.chain.family == "birth_death"
    assert rs.chain.mu == 2.0
    assert rs.chain.b == 1.0
    assert rs.solve.trunc_n == 2000
    assert rs.solve.method == "auto"
    assert rs.simulate.seed == 24245
    assert rs.simulate.n_steps == 100000
    assert rs.simulate.n_replicas == 2000
    assert rs.simulate.horizon_factor == 20.0
    assert rs.report.out_dir == "report_out"


def test_empty_file_keeps_defaults(tmp_path):
    rs = load_settings(write_ini(tmp_path, ""))
    assert rs == RunSettings()


def test_round_trip_of_values(tmp_path):
    rs = load_settings(write_ini(tmp_path, """
[chain]
family = left_skip_free
mu = 2.5
b = 0.5
m3_low = 0.1
m3_high = 0.9

[solve]
trunc_n = 800
method = global_balance
gb_tol = 1e-9

[fit]
window_lo = 40
window_hi = 300
exponent_tol = 0.2

[simulate]
seed = 7
n_replicas = 128
backend = numpy

[report]
out_dir = out_here
"""))
    assert rs.chain.family == "left_skip_free"
    assert rs.chain.mu == 2.5
    assert rs.chain.m3_high == 0.9
    assert rs.solve.trunc_n == 800
    assert rs.solve.method == "global_balance"
    assert rs.fit.window(rs.solve.trunc_n) == (40, 300)
    assert rs.fit.exponent_tol == 0.2
    assert rs.simulate.seed == 7
    assert rs.simulate.backend == "numpy"
    assert rs.report.out_dir == "out_here"


def test_unknown_section_rejected(tmp_path):
    with pytest.raises(ConfigError, match="section"):
        load_settings(write_ini(tmp_path, "[quantum]\nflux = 3\n"))


def test_unknown_key_rejected(tmp_path):
    with pytest.raises(ConfigError, match="chain"):
        load_settings(write_ini(tmp_path, "[chain]\ncolor = red\n"))


def test_bad_value_names_section_and_key(tmp_path):
    with pytest.raises(ConfigError, match=r"chain.*mu|mu.*chain"):
        load_settings(write_ini(tmp_path, "[chain]\nmu = two\n"))


def test_unknown_family_rejected(tmp_path):
    with pytest.raises(ConfigError, match="family"):
        load_settings(write_ini(tmp_path, "[chain]\nfamily = levy\n"))


def test_unknown_method_rejected(tmp_path):
    with pytest.raises(ConfigError, match="method"):
        load_settings(write_ini(tmp_path, "[solve]\nmethod = magic\n"))


def test_unknown_backend_rejected(tmp_path):
    with pytest.raises(ConfigError, match="backend"):
        load_settings(write_ini(tmp_path, "[simulate]\nbackend = gpu\n"))


def test_one_sided_fit_window_rejected(tmp_path):
    with pytest.raises(ConfigError, match="window"):
        load_settings(write_ini(tmp_path, "[fit]\nwindow_lo = 40\n"))


def test_default_fit_window_is_unset():
    assert RunSettings().fit.window(2000) is None


def test_build_chain_all_families():
    tags = {}
    for family in ("birth_death", "updrift_birth_death", "reflected_walk",
                   "left_skip_free", "origin_jump"):
        cs = ChainSettings(family=family, mu=2.0, b=1.0)
        if family == "origin_jump":
            cs = ChainSettings(family=family, mu=2.7, b=0.3,
                               f_scale=4.2, p_scale=1.25)
        chain = build_chain(cs)
        tags[family] = chain.family_tag
    assert tags["birth_death"] == "birth_death"
    assert tags["origin_jump"].startswith("origin_jump")


def test_build_chain_maps_value_errors():
    with pytest.raises(ConfigError):
        build_chain(ChainSettings(family="birth_death", mu=-1.0, b=1.0))
    with pytest.raises(ConfigError, match="infeasible"):
        build_chain(ChainSettings(family="left_skip_free", mu=2.0, b=1.0,
                                  m3_low=0.5, m3_high=1.5))
