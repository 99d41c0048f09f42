import subprocess
import sys

import numpy as np
import pytest

from ltpa import textfmt
from ltpa.cli import main
from ltpa.ltmodel import load_model
from ltpa.signal import read_iq, read_iq_csv


def run(*args):
    return main([str(a) for a in args])


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert run("gen", "--out", d / "x.iq", "--seglen", 8000, "--seed", 3) == 0
    assert run("sim", "--in", d / "x.iq", "--out", d / "y.iq") == 0
    assert run("fit", "--in", d / "x.iq", "--meas", d / "y.iq", "--out", d / "m.model",
               "--odd", "--init-alpha", 0.99) == 0
    return d


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "ltpa", "--help"], capture_output=True,
                         text=True, check=True)
    assert "twotone-init" in out.stdout


def test_gen_and_sim_outputs(pipeline):
    x = read_iq(pipeline / "x.iq")
    y = read_iq(pipeline / "y.iq")
    assert x.samples.size == 32000 and y.samples.size == 32000
    assert x.sample_rate == 30.72e6


def test_fit_outputs(pipeline):
    m = load_model(pipeline / "m.model")
    assert m.n_states == 1 and m.state_filters[0].alpha[0] > 0.99
    top, _ = textfmt.parse((pipeline / "m.model.report.txt").read_text(), "fit-report")
    assert top.keys["status"] in ("converged", "max_iterations")
    assert (pipeline / "m.model.trace.csv").read_text().startswith("iteration,nmse_db")
    assert (pipeline / "m.model.blocks.csv").read_text().startswith("block,")


def test_eval_text_and_csv(pipeline, capsys):
    d = pipeline
    assert run("eval", "--model", d / "m.model", "--in", d / "x.iq", "--meas", d / "y.iq",
               "--psd", d / "psd.csv") == 0
    text = capsys.readouterr().out
    assert "nmse_db" in text
    assert run("eval", "--model", d / "m.model", "--in", d / "x.iq", "--meas", d / "y.iq",
               "--format", "csv", "--out", d / "e.csv") == 0
    rows = (d / "e.csv").read_text().splitlines()
    assert len(rows) == 2 and "nmse_db" in rows[0]
    assert (d / "psd.csv").read_text().startswith("frequency_hz,psd_db")


def test_dpd_command(pipeline):
    d = pipeline
    assert run("dpd", "--in", d / "x.iq", "--freeze-filters", d / "m.model", "--odd",
               "--iterations", 2, "--compare-orders", "5,3", "--out", d / "dpd.txt",
               "--signal-out", d / "u.iq") == 0
    text = (d / "dpd.txt").read_text()
    assert text.count("dpd-report") == 2 and "dpd-comparison" in text
    assert read_iq(d / "u.iq").samples.size == 32000


def test_twotone_commands(tmp_path):
    assert run("twotone-measure", "--out", tmp_path / "m.csv", "--points", 6,
               "--settle", 20000) == 0
    assert run("twotone-init", "--measurements", tmp_path / "m.csv", "--fit", "ar1",
               "--out", tmp_path / "g.filter") == 0
    assert "alpha" in (tmp_path / "g.filter").read_text()


def test_csv_waveforms(tmp_path):
    assert run("--csv-rate", 1e6, "gen", "--out", tmp_path / "x.csv", "--seglen", 100) == 0
    x = read_iq_csv(tmp_path / "x.csv", 1e6)
    assert x.samples.size == 400
    assert run("gen", "--kind", "twotone", "--offset", 1e3, "--out", tmp_path / "t.iq") == 0
    t = read_iq(tmp_path / "t.iq")
    assert t.samples.size == 30720
    np.testing.assert_allclose(np.mean(t.samples), 0.5, atol=1e-12)


def test_exit_codes(tmp_path, pipeline):
    with pytest.raises(SystemExit) as e:
        run("fit")
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        run("gen", "--kind", "twotone", "--steps", "0", "--out", tmp_path / "z.iq")
    assert e.value.code == 2
    assert run("eval", "--model", tmp_path / "missing.model", "--in", pipeline / "x.iq",
               "--meas", pipeline / "y.iq") == 3
    (tmp_path / "bad.iq").write_bytes(b"NOPE")
    assert run("sim", "--in", tmp_path / "bad.iq", "--out", tmp_path / "o.iq") == 3
    # a zero output cannot identify anything
    run("gen", "--out", tmp_path / "x.iq", "--seglen", 200)
    x = read_iq(tmp_path / "x.iq")
    from ltpa.signal import write_iq
    write_iq(x.with_samples(np.zeros_like(x.samples)), tmp_path / "zero.iq")
    assert run("fit", "--in", tmp_path / "x.iq", "--meas", tmp_path / "zero.iq",
               "--out", tmp_path / "z.model", "--block", 100) == 3


def test_determinism(tmp_path):
    outs = []
    for k in (1, 2):
        d = tmp_path / str(k)
        d.mkdir()
        run("gen", "--out", d / "x.iq", "--seglen", 4000)
        run("sim", "--in", d / "x.iq", "--out", d / "y.iq")
        run("fit", "--in", d / "x.iq", "--meas", d / "y.iq", "--out", d / "m.model", "--odd",
            "--init-alpha", 0.99)
        outs.append([(d / f).read_bytes() for f in
                     ("x.iq", "y.iq", "m.model", "m.model.report.txt", "m.model.trace.csv")])
    assert outs[0] == outs[1]
