import pytest

from fkdim.config import (
    ConfigError,
    ExperimentConfig,
    dumps,
    load,
    loads,
    parse_measure,
    parse_mistake,
    parse_system,
    with_overrides,
)
from fkdim.orbit_metrics import MistakeFunction
from fkdim.systems import CubeShift, DoublingMap, FullShiftFinite, Product, SymbolicPeriodic, TentMap


def test_parse_system_expressions():
    assert parse_system("doubling()") == DoublingMap()
    assert parse_system("full_shift(k=3, base=4.0)") == FullShiftFinite(3, 4.0)
    assert parse_system("cube_shift(2)") == CubeShift(2)
    assert parse_system("product(tent(), doubling(), 'sum')") == Product(TentMap(), DoublingMap(), "sum")
    for bad in ("doubling", "shift()", "full_shift(k=0)", "__import__('os')", "full_shift(k=2,"):
        with pytest.raises(ConfigError):
            parse_system(bad)


def test_parse_mistake_and_measure():
    assert parse_mistake("power(0.25)") == MistakeFunction.power(0.25)
    assert parse_mistake("log()") == MistakeFunction.logarithmic()
    with pytest.raises(ConfigError):
        parse_mistake("power(2)")
    sys = FullShiftFinite(2)
    assert parse_measure(sys, "bernoulli(0.9, 0.1)").weights == (0.9, 0.1)
    assert parse_measure(sys, "point(0,1)").point == SymbolicPeriodic(2, [0, 1])
    with pytest.raises(ConfigError):
        parse_measure(sys, "bernoulli(0.9, 0.2)")


def test_roundtrip_defaults_and_custom():
    cfg = ExperimentConfig()
    assert loads(dumps(cfg)) == cfg
    cfg = ExperimentConfig(system="cube_shift(1, base=1024.0)", kinds=("fk", "bowen"), eps=(0.25, 0.1),
                           n_min=2, n_max=4, weights=(0.25, 0.75), measures=("uniform", "bernoulli(0.5, 0.5)"),
                           probes=("0.5", "0.25;0.75"), radii=(0.5,), local_eps=0.1, slope_low=0.7,
                           slope_high=1.3, thm13_gap=None, seed=7, gnuplot=True)
    assert loads(dumps(cfg)) == cfg
    assert cfg.hash() == loads(dumps(cfg)).hash() != ExperimentConfig().hash()


def test_partial_file_uses_defaults(tmp_path):
    path = tmp_path / "c.ini"
    path.write_text("[system]\nmodel = doubling()\n\n[grid]\neps = 0.2, 0.1\nn_min = 2\nn_max = 5\n")
    cfg = load(path)
    assert cfg.build_system() == DoublingMap()
    assert cfg.eps == (0.2, 0.1) and cfg.n_window == (2, 5)
    assert cfg.universe == ExperimentConfig().universe


@pytest.mark.parametrize("text,where", [
    ("[grid]\neps = 0.1, 0.2\n", ":2: grid.eps"),
    ("[system]\nmodel = doubling()\n[sampling]\n\nuniverse = x\n", ":5: sampling.universe"),
    ("[katok]\ndelta = 1.5\n", ":2: katok.delta"),
    ("[metrics]\nkinds = fk, hamming\n", ":2: metrics.kinds"),
    ("[grid]\nn_min = 9\nn_max = 3\n", ":2: grid.n_min"),
    ("[bogus]\nx = 1\n", ":1: unknown section"),
    ("[grid]\nspeed = 1\n", ":2: unknown key grid.speed"),
    ("[local]\nprobes =\n    0,1\n    0.5\n", "local.probes"),
])
def test_errors_name_line_and_field(text, where):
    with pytest.raises(ConfigError) as err:
        loads(text, "x.ini")
    assert str(err.value).startswith("x.ini")
    assert where in str(err.value)


def test_overrides_validate():
    cfg = with_overrides(ExperimentConfig(), seed=5, out=None)
    assert cfg.seed == 5 and cfg.out == "out"
    with pytest.raises(ConfigError):
        with_overrides(ExperimentConfig(), thm11=-1.0)
