import numpy as np

from loadertwin import plotting
from loadertwin.traces import ForceTrace
from samples import sample_result


def test_dat_blocks_and_script():
    series = [("a", np.array([0.0, 1.0]), np.array([2.0, 3.0])),
              ("b \"q\"", np.array([0.5]), np.array([1.5]))]
    text = plotting.dat_text(series, ("x", "y"))
    assert text.splitlines() == ["# schema_version=1 kind=figure_data", "# a", "# x y",
                                 "0.0 2.0", "1.0 3.0", "", "", '# b "q"', "# x y", "0.5 1.5"]
    gp = plotting.gnuplot_script("f.dat", "f.png", ["a", 'b "q"'], "T", "x", "y")
    assert '"f.dat" index 0 using 1:2' in gp and '"f.dat" index 1 using 1:2' in gp
    assert 'title "b \\"q\\""' in gp
    assert 'set output "f.png"' in gp


def test_emit_figure_files(tmp_path):
    tr = ForceTrace([0.0, 1.0, 2.0], [0.0, 1500.0, 200.0], "measured")
    paths = plotting.emit_figure(tmp_path, "f", plotting.trace_series([tr]), title="F",
                                 xlabel="t (s)", ylabel="force (kN)")
    assert set(paths) == {"dat", "gp", "png"}
    assert "1.5" in (tmp_path / "f.dat").read_text()
    assert (tmp_path / "f.png").read_bytes()[:4] == b"\x89PNG"
    again = plotting.emit_figure(tmp_path, "g", plotting.trace_series([tr]), title="F",
                                 xlabel="t (s)", ylabel="force (kN)", png=False)
    assert "png" not in again and not (tmp_path / "g.png").exists()


def test_history_series_drops_failed_points():
    (_, x, y), (_, bx, by) = plotting.history_series(sample_result())
    assert list(x) == [0.0, 1.0, 2.0]
    assert list(by) == [44.25, 20.125, 3.5, 3.5]
    assert list(bx) == [0.0, 1.0, 2.0, 3.0]
