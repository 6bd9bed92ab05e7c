import re

import numpy as np
import pytest

from diar_adapt.cli import main
from diar_adapt.embeddings import read_embeddings


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    d = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--out-dir", str(d), "--sessions", "2", "--seed", "3",
                 "--min-windows", "30", "--max-windows", "40"]) == 0
    return d


def test_synth_writes_three_files_per_session(dataset):
    names = sorted(p.name for p in dataset.iterdir())
    assert names == [f"synth00{i}.{ext}" for i in range(2) for ext in ("rttm", "sadp", "seg")]


def test_diarise_to_stdout(dataset, capsys):
    code = main(["diarise", "--embeddings", str(dataset / "synth000.seg"), "--sad", str(dataset / "synth000.sadp"),
                 "--clusterer", "spc", "--nonspeech", "sad"])
    assert code == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines and all(line.startswith("SPEAKER synth000 1 ") for line in lines)


def test_diarise_then_score(dataset, tmp_path, capsys):
    hyp = tmp_path / "hyp.rttm"
    assert main(["diarise", "--embeddings", str(dataset / "synth001.seg"), "--sad", str(dataset / "synth001.sadp"),
                 "--out", str(hyp), "--dr", "--aa", "--ae-epochs", "10"]) == 0
    assert hyp.exists()
    capsys.readouterr()
    assert main(["score", "--ref", str(dataset / "synth001.rttm"), "--hyp", str(hyp), "--collar", "0.25"]) == 0
    last = capsys.readouterr().out.splitlines()[-1]
    assert last.startswith("TOTAL")
    assert re.search(r"\d+\.\d{2}$", last)


def test_score_self_is_zero(dataset, capsys):
    ref = str(dataset / "synth000.rttm")
    assert main(["score", "--ref", ref, "--hyp", ref]) == 0
    assert capsys.readouterr().out.splitlines()[-1].endswith(" 0.00")


def test_prototype_mode(dataset, tmp_path, capsys):
    session = read_embeddings(dataset / "synth000.seg")
    proto = tmp_path / "proto.seg"
    proto.write_text("0 1 " + " ".join(str(v) for v in np.ones(session.dim)) + "\n")
    code = main(["diarise", "--embeddings", str(dataset / "synth000.seg"), "--sad", str(dataset / "synth000.sadp"),
                 "--nonspeech", f"prototype:{proto}", "--num-speakers", "2"])
    assert code == 0
    assert capsys.readouterr().out


def test_ablate_writes_csv(dataset, tmp_path, capsys):
    out = tmp_path / "abl.csv"
    assert main(["ablate", "--data-dir", str(dataset), "--out", str(out), "--ae-epochs", "5"]) == 0
    table = capsys.readouterr().out
    assert "DR+AA+NS" in table
    assert len(out.read_text().splitlines()) == 17


class TestExitCodes:
    def test_missing_required(self, capsys):
        assert main(["score", "--ref", "x.rttm"]) == 1

    def test_no_command(self):
        assert main([]) == 1

    def test_bad_num_speakers(self, dataset):
        assert main(["diarise", "--embeddings", str(dataset / "synth000.seg"), "--num-speakers", "two"]) == 1

    def test_bad_nonspeech_mode(self, dataset):
        assert main(["diarise", "--embeddings", str(dataset / "synth000.seg"), "--nonspeech", "maybe"]) == 1

    def test_negative_collar(self, dataset):
        ref = str(dataset / "synth000.rttm")
        assert main(["score", "--ref", ref, "--hyp", ref, "--collar", "-1"]) == 1

    def test_missing_file(self, tmp_path, capsys):
        assert main(["diarise", "--embeddings", str(tmp_path / "none.seg")]) == 2
        assert "data error" in capsys.readouterr().err

    def test_malformed_input(self, tmp_path, capsys):
        bad = tmp_path / "bad.seg"
        bad.write_text("0 1 0.5\n1 0 0.5\n")
        assert main(["diarise", "--embeddings", str(bad)]) == 2
        assert "bad.seg:2" in capsys.readouterr().err

    def test_nonspeech_without_sad(self, dataset, capsys):
        assert main(["diarise", "--embeddings", str(dataset / "synth000.seg"), "--nonspeech", "sad"]) == 2
        assert "nonspeech" in capsys.readouterr().err


class TestConfigFile:
    def _run(self, dataset, cfg, *extra):
        return main(["diarise", "--embeddings", str(dataset / "synth000.seg"),
                     "--sad", str(dataset / "synth000.sadp"), "--config", str(cfg), *extra])

    def test_file_values_used(self, dataset, tmp_path, capsys):
        cfg = tmp_path / "a.cfg"
        cfg.write_text("num-speakers = 1\nclusterer = spc\n")
        assert self._run(dataset, cfg) == 0
        speakers = {line.split()[7] for line in capsys.readouterr().out.splitlines()}
        assert len(speakers) == 1

    def test_flag_overrides_file(self, dataset, tmp_path, capsys):
        cfg = tmp_path / "a.cfg"
        cfg.write_text("num-speakers = 1\n")
        assert self._run(dataset, cfg, "--num-speakers", "2") == 0
        speakers = {line.split()[7] for line in capsys.readouterr().out.splitlines()}
        assert len(speakers) == 2

    def test_boolean_in_file(self, dataset, tmp_path, capsys):
        cfg = tmp_path / "a.cfg"
        cfg.write_text("aa = true\naa-iterations = 2\n")
        assert self._run(dataset, cfg) == 0

    def test_unknown_key(self, dataset, tmp_path, capsys):
        cfg = tmp_path / "a.cfg"
        cfg.write_text("speed = fast\n")
        assert self._run(dataset, cfg) == 1
        assert "speed" in capsys.readouterr().err

    def test_bad_value(self, dataset, tmp_path):
        cfg = tmp_path / "a.cfg"
        cfg.write_text("aa-iterations = lots\n")
        assert self._run(dataset, cfg) == 1

    def test_malformed_file(self, dataset, tmp_path):
        cfg = tmp_path / "a.cfg"
        cfg.write_text("just words\n")
        assert self._run(dataset, cfg) == 2
