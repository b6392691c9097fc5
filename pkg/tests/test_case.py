import pytest

from thermopf.case import load_case, parse_case
from thermopf.errors import CaseError

MINIMAL = """
[network]
lines = [[1, 2, 0.5, 0.25]]
loads = [[2, 100, 50]]

[ess]
bus = 2
"""


def test_bundled_case(case33):
    g = case33.grid
    assert len(g.buses) == 33 and len(g.lines) == 32
    assert g.slack_bus == 1 and case33.ess.bus == 6
    assert g.total_load == pytest.approx(3.715)
    assert sum(b.q_load for b in g.buses) == pytest.approx(2.3)
    assert (g.v_min, g.v_max) == pytest.approx((0.81, 1.21))
    assert case33.fan_speed == 2000.0 and case33.current == 50.0
    assert case33.params.lam == pytest.approx(0.01814)
    assert len(case33.sweep.target_scalings) == 5 and len(case33.sweep.weights) == 20


def test_minimal_two_bus():
    case = parse_case(MINIMAL)
    z_base = 12.66**2
    assert [b.id for b in case.grid.buses] == [1, 2]
    assert case.grid.lines[0].r == pytest.approx(0.5 / z_base)
    assert case.grid.buses[1].p_load == pytest.approx(0.1)


def test_csv_tables(tmp_path):
    (tmp_path / "lines.csv").write_text("from,to,r_ohm,x_ohm\n1,2,0.5,0.25\n2,3,0.5,0.25\n")
    (tmp_path / "loads.csv").write_text("# bus,p,q\n2,100,50\n3,50,10\n")
    (tmp_path / "case.toml").write_text(
        '[network]\nlines_file = "lines.csv"\nloads_file = "loads.csv"\n[ess]\nbus = 3\n'
    )
    case = load_case(tmp_path / "case.toml")
    assert len(case.grid.lines) == 2
    assert case.grid.total_load == pytest.approx(0.15)


def test_mixed_grid_forms():
    text = MINIMAL + "[sweep.mixed]\nfan_start = 1000\nfan_stop = 1100\nfan_step = 50\ncurrent_grid = [40, 45]\n"
    case = parse_case(text)
    assert case.mixed.fan_grid == (1000.0, 1050.0, 1100.0)
    assert case.mixed.current_grid == (40.0, 45.0)


@pytest.mark.parametrize("text, match", [
    (MINIMAL + "[extra]\nx = 1\n", "unknown section"),
    (MINIMAL.replace("bus = 2", "bus = 2\ncolour = 1"), "unknown field"),
    (MINIMAL.replace("bus = 2", "bus = 7"), "not part of the network"),
    (MINIMAL + "[thermal]\nn_modules = 9\n", "series_modules"),
    (MINIMAL.replace("0.5, 0.25", "-0.5, 0.25"), "negative impedance"),
    (MINIMAL.replace("[[1, 2, 0.5, 0.25]]", "[[1, 2, 0.5, 0.25], [2, 1, 0.5, 0.25]]"), "not radial"),
    (MINIMAL.replace("[[2, 100, 50]]", "[[2, 100]]"), "expected 3 columns"),
    (MINIMAL + "[control]\nreduction = 'median'\n", "reduction"),
    (MINIMAL + "[thermal]\ncurrent = -1\n", "current"),
    ("[ess]\nbus = 2\n", "missing \\[network\\]"),
    ("[network\n", "case"),
    (MINIMAL + "[sweep.mixed]\nfan_start = 1\n", "missing"),
])
def test_case_errors(text, match):
    with pytest.raises(CaseError, match=match):
        parse_case(text)


def test_missing_file():
    with pytest.raises(CaseError):
        load_case("/nonexistent/case.toml")
