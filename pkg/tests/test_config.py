import numpy as np
import pytest

from midpoint_llg import model as mdl
from midpoint_llg.config import ConfigError, RunConfig, build_model, initial_state, load_config, parse_config
from midpoint_llg.mesh import build_unit_cube_mesh


def test_defaults_and_schedules():
    cfg = parse_config("")
    assert cfg == RunConfig()
    ks = cfg.k_schedule()
    assert len(ks) == 28 and ks[0] == 0.00016 and ks[13] == pytest.approx(0.00016 * 1.25**13)
    eps = cfg.eps_list()
    assert len(eps) == 25 and eps[0] == 1.0 and eps[-1] == pytest.approx(1e-12)


def test_parse_examples(tmp_path):
    text = """
    # a comment
    N = 8          # trailing comment
    k = 5e-4
    mode = fixedpoint
    preset = exchange_dmi
    ldm = 0.5
    N_list = 2, 4
    k_list = 0.01 0.003
    sweep_modes = newton
    paper_literal_pi = yes
    """
    path = tmp_path / "run.cfg"
    path.write_text(text)
    cfg = load_config(path)
    assert (cfg.N, cfg.k, cfg.mode, cfg.ldm) == (8, 5e-4, "fixedpoint", 0.5)
    assert cfg.N_list == (2, 4) and cfg.k_list == (0.01, 0.003) and cfg.sweep_modes == ("newton",)
    assert cfg.paper_literal_pi is True
    assert cfg.source_lines["k"] == 4
    assert "source_lines" not in cfg.as_dict()


@pytest.mark.parametrize("text, line, fragment", [
    ("k = -1", 1, "must be positive"),
    ("\nfoo = 1", 2, "unknown key"),
    ("N = 4\nN = four", 2, "cannot parse"),
    ("mode = rk4", 1, "unknown mode"),
    ("just text", 1, "key = value"),
    ("pi_axis = 1 2", 1, "expected 3 numbers"),
    ("N_list = 2 4\nk_list = 0.1", 2, "one entry per"),
    ("\n\nq = 0.5", 3, "growth factor"),
])
def test_errors_carry_line_numbers(text, line, fragment):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.line == line
    assert str(info.value).startswith(f"line {line}:") and fragment in str(info.value)


def test_build_model_presets():
    mesh = build_unit_cube_mesh(2)
    assert build_model(parse_config("lex = 2")).A0 == pytest.approx(4.0)
    dmi = build_model(parse_config("preset = exchange_dmi\nldm = 0.6"))
    lit = build_model(parse_config("preset = exchange_dmi\nldm = 0.6\npaper_literal_pi = 1"))
    m = np.random.default_rng(1).standard_normal((mesh.n_nodes, 3))
    assert np.allclose(mdl.pi_apply(dmi, mesh, m), 0.18 * m)
    assert np.allclose(mdl.pi_apply(lit, mesh, m), 0.3 * m)
    uni = build_model(parse_config("pi = uniaxial\npi_c = 2\nf = 0 0 1"), mesh)
    assert np.allclose(uni.source(mesh), [0, 0, 1])
    with pytest.raises(ValueError, match="mesh"):
        build_model(parse_config("f = 1 0 0"))
    nums = " ".join(["1 0 0 0 1 0 0 0 1"] * 3)
    gen = build_model(parse_config(f"preset = general\nA = {nums}\nJ = {' '.join(['0'] * 27)}"))
    assert np.allclose(gen.A, np.eye(3))


def test_initial_states():
    mesh = build_unit_cube_mesh(2)
    for kind in ("hedgehog", "uniform", "random"):
        m = initial_state(parse_config(f"initial = {kind}\nseed = 3"), mesh)
        assert np.allclose(np.linalg.norm(m, axis=1), 1.0)
    a = initial_state(parse_config("initial = random\nseed = 3"), mesh)
    b = initial_state(parse_config("initial = random\nseed = 3"), mesh)
    assert np.array_equal(a, b)
