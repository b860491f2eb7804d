import pytest

from polychron.main import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, main


TINY_RUN = [
    "--set", "model.kind=rnn",
    "--set", "model.n=8",
    "--set", "model.n_t=2",
    "--set", "model.n_c=3",
    "--set", "model.n_inp=8",
    "--set", "model.init_scale=0.1",
    "--set", "train.batch_size=4",
    "--set", "train.max_steps=4",
    "--set", "train.eval_interval=2",
    "--set", "train.max_eval_windows=4",
    "--set", "train.warmup_steps=10",
]


class TestReports:
    def test_capacity(self, capsys):
        assert main(["capacity", "--n-t", "64", "--n-c", "10", "--n", "60", "--m", "4"]) == EXIT_OK
        out = capsys.readouterr().out.splitlines()
        assert out[0] == "lut bits: 640"
        assert [line.split()[0] for line in out[1:]] == ["lut", "order", "binned"]

    def test_resources_csv(self, capsys):
        assert main(["resources", "--model", "snn-transformer", "--format", "csv"]) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "component,metric,value"
        assert lines.count("component,metric,value") == 1
        assert "snn-layer-head/value,memory_footprint,10485760" in lines

    def test_resources_text(self, capsys):
        assert main(["resources"]) == EXIT_OK
        out = capsys.readouterr().out
        assert out.startswith("spiking RNN, per token")
        assert "5,259,264" in out

    def test_dense_baseline(self, capsys):
        assert main(["resources", "--model", "ann-transformer", "--format", "csv"]) == EXIT_OK
        assert "ann-layer,compute_total,235405312" in capsys.readouterr().out.splitlines()

    def test_negative_dimension(self, capsys):
        assert main(["resources", "--model", "ann-transformer", "--d-model", "-1"]) == EXIT_USAGE
        assert "polychron resources:" in capsys.readouterr().err

    def test_unknown_command(self):
        with pytest.raises(SystemExit) as info:
            main(["serve"])
        assert info.value.code == 2


class TestTrainingRun:
    def test_train_eval_generate_resume(self, corpus_file, tmp_path, capsysbinary):
        out = tmp_path / "run"
        assert main(["train", "--data", str(corpus_file), "--out", str(out), *TINY_RUN]) == EXIT_OK
        printed = capsysbinary.readouterr().out.decode().splitlines()
        assert [line.split()[1] for line in printed] == ["0", "2", "4"]
        curve = (out / "curve.csv").read_text(encoding="utf-8").splitlines()
        assert len(curve) == 4
        assert (out / "step_2.ckpt").is_file()
        assert (out / "step_4.ckpt").is_file()

        assert main(["eval", "--ckpt", str(out / "step_4.ckpt"), "--data", str(corpus_file)]) == EXIT_OK
        assert 0.0 < float(capsysbinary.readouterr().out) < 9.0

        checkpoint = str(out / "step_4.ckpt")
        args = ["generate", "--ckpt", checkpoint, "--prompt", "the ", "--len", "16", "--seed", "1"]
        assert main(args) == EXIT_OK
        first = capsysbinary.readouterr().out
        assert len(first) == 16
        assert main(args) == EXIT_OK
        assert capsysbinary.readouterr().out == first

        resume = [
            "train", "--data", str(corpus_file), "--out", str(out),
            "--resume", str(out / "step_2.ckpt"), "--set", "train.max_steps=6",
        ]
        assert main(resume) == EXIT_OK
        printed = capsysbinary.readouterr().out.decode().splitlines()
        assert [line.split()[1] for line in printed] == ["4", "6"]
        assert len((out / "curve.csv").read_text(encoding="utf-8").splitlines()) == 6
        assert (out / "step_6.ckpt").is_file()

    def test_resume_cannot_change_the_model(self, corpus_file, tmp_path):
        out = tmp_path / "run"
        assert main(["train", "--data", str(corpus_file), "--out", str(out), *TINY_RUN]) == EXIT_OK
        resume = [
            "train", "--data", str(corpus_file), "--out", str(out),
            "--resume", str(out / "step_2.ckpt"), "--set", "model.n=16",
        ]
        assert main(resume) == EXIT_USAGE

    @pytest.mark.parametrize("seed", [["--seed", "9"], ["--set", "train.seed=9"]])
    def test_resume_keeps_the_stored_seed(self, corpus_file, tmp_path, seed):
        out = tmp_path / "run"
        assert main(["train", "--data", str(corpus_file), "--out", str(out), *TINY_RUN]) == EXIT_OK
        resume = [
            "train", "--data", str(corpus_file), "--out", str(out),
            "--resume", str(out / "step_2.ckpt"), *seed,
        ]
        assert main(resume) == EXIT_USAGE

    def test_missing_corpus(self, tmp_path):
        code = main(["train", "--data", str(tmp_path / "absent.txt"), "--out", str(tmp_path), *TINY_RUN])
        assert code == EXIT_USAGE

    def test_bad_override(self, corpus_file, tmp_path):
        code = main(["train", "--data", str(corpus_file), "--out", str(tmp_path), "--set", "model.n"])
        assert code == EXIT_USAGE

    def test_missing_checkpoint(self, corpus_file, tmp_path, capsys):
        code = main(["eval", "--ckpt", str(tmp_path / "none.ckpt"), "--data", str(corpus_file)])
        assert code == EXIT_FAILURE
        assert "checkpoint not found" in capsys.readouterr().err


class TestSelftest:
    def test_one_suite(self, capsys):
        assert main(["selftest", "--suite", "counter-match"]) == EXIT_OK
        assert capsys.readouterr().out.startswith("PASS counter-match")
