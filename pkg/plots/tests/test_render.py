import subprocess
import sys

import pytest

import render

M1_CSV = """\
m1,iter,mean_nmse
10,50,0.5
10,100,0.1
10,150,0.05
50,50,0.2
50,100,0.02
50,150,0.004
"""

COMPARE_CSV = """\
iter,mean_nmse
10,0.9
20,0.4
30,0.15
"""

RENDER = [sys.executable, str(render.__file__)]


@pytest.fixture()
def m1_csv(tmp_path):
    path = tmp_path / "nmse_vs_iter_m1.csv"
    path.write_text(M1_CSV)
    return path


class TestM1Sweep:
    def test_emits_svg_with_one_series_per_m1(self, m1_csv, tmp_path):
        out = tmp_path / "fig1.svg"
        count = render.plot_m1_sweep(str(m1_csv), str(out))
        assert count == 2
        body = out.read_text()
        assert body.lstrip().startswith("<?xml")
        assert "m1=10" in body and "m1=50" in body

    def test_figure_is_log_scaled_with_sorted_legend(self, m1_csv):
        series = render.read_m1_sweep(str(m1_csv))
        fig = render.build_m1_figure(series)
        ax = fig.axes[0]
        assert ax.get_yscale() == "log"
        assert len(ax.lines) == 2
        labels = [t.get_text() for t in ax.get_legend().get_texts()]
        assert labels == ["m1=10", "m1=50"]

    def test_terminal_values_decrease_with_m1(self, m1_csv):
        series = render.read_m1_sweep(str(m1_csv))
        finals = [series[m1][1][-1] for m1 in sorted(series)]
        assert finals == sorted(finals, reverse=True)

    def test_wrong_header_raises(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("m1,iteration,nmse\n10,1,0.5\n")
        with pytest.raises(render.SchemaError):
            render.plot_m1_sweep(str(bad), str(tmp_path / "x.svg"))

    def test_empty_data_raises(self, tmp_path):
        bad = tmp_path / "empty.csv"
        bad.write_text("m1,iter,mean_nmse\n")
        with pytest.raises(render.SchemaError):
            render.plot_m1_sweep(str(bad), str(tmp_path / "x.svg"))

    def test_rerender_is_byte_identical(self, m1_csv, tmp_path):
        a, b = tmp_path / "a.svg", tmp_path / "b.svg"
        render.plot_m1_sweep(str(m1_csv), str(a))
        render.plot_m1_sweep(str(m1_csv), str(b))
        assert a.read_bytes() == b.read_bytes()

    def test_png_flag(self, m1_csv, tmp_path):
        out = tmp_path / "fig1.png"
        render.plot_m1_sweep(str(m1_csv), str(out), png=True)
        assert out.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


class TestSolverCompare:
    def test_three_curves_shared_axes(self, tmp_path):
        paths = []
        for algo in ("rka", "skm", "block_skm"):
            p = tmp_path / f"fig3_{algo}.csv"
            p.write_text(COMPARE_CSV)
            paths.append(str(p))
        out = tmp_path / "fig3.svg"
        assert render.plot_solver_compare(paths, str(out)) == 3
        body = out.read_text()
        for algo in ("rka", "skm", "block_skm"):
            assert algo in body

    def test_missing_file_raises(self, tmp_path):
        with pytest.raises(render.SchemaError):
            render.plot_solver_compare([str(tmp_path / "none.csv")],
                                       str(tmp_path / "x.svg"))

    def test_wrong_header_raises(self, tmp_path):
        bad = tmp_path / "fig3_rka.csv"
        bad.write_text("step,nmse\n1,0.5\n")
        with pytest.raises(render.SchemaError):
            render.plot_solver_compare([str(bad)], str(tmp_path / "x.svg"))


class TestCli:
    def test_m1_mode_exit_zero(self, m1_csv, tmp_path):
        out = tmp_path / "fig.svg"
        proc = subprocess.run(
            RENDER + ["--mode", "m1", "--in", str(m1_csv), "--out", str(out)],
            capture_output=True,
        )
        assert proc.returncode == 0
        assert out.exists()

    def test_schema_violation_exits_nonzero(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("wrong,header\n1,2\n")
        proc = subprocess.run(
            RENDER + ["--mode", "m1", "--in", str(bad), "--out",
                      str(tmp_path / "x.svg")],
            capture_output=True,
        )
        assert proc.returncode != 0
        assert b"header" in proc.stderr

    def test_compare_mode(self, tmp_path):
        p = tmp_path / "fig3_skm.csv"
        p.write_text(COMPARE_CSV)
        out = tmp_path / "fig3.svg"
        proc = subprocess.run(
            RENDER + ["--mode", "compare", "--in", str(p), "--out", str(out)],
            capture_output=True,
        )
        assert proc.returncode == 0
        assert out.exists()
