#    hiddenshift - graph structure attack laboratory
#    Licensed under the GNU AGPLv3
#    https://www.gnu.org/licenses/agpl-3.0.html

import csv
import json
import os

from hiddenshift.gcn import load_checkpoint
from hiddenshift.graph import load_graph
from hiddenshift.main import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main, parse_arguments

FAST = ["--train.epochs=20", "--train.hidden_dim=8", "--train.dropout=0"]
TINY_CSBM = ["--csbm.n=40", "--csbm.p_in=0.2", "--csbm.q_out=0.05", "--csbm.feat_dim=3"]
SHORT_ATTACKS = ["--perturb.iterations=3", "--map.iterations=5", "--map.samples=3"]


def test_parse_arguments_keeps_overrides():
    arguments, overrides = parse_arguments(
        ["sweep", "--param", "beta", "--values", "0.1", "0.2", "--perturb.iterations=3"]
    )

    assert arguments.command == "sweep"
    assert arguments.values == ["0.1", "0.2"]
    assert overrides == ["--perturb.iterations=3"]


def test_report_command(tmp_path, dataset_dir):
    out = str(tmp_path / "out")
    code = main(
        [
            "report",
            f"--out={out}",
            f"--dataset.path={dataset_dir}",
            "--attack", "identity", "random",
            "--defense", "none",
            "--budget", "0.1",
            "--seed", "0", "1",
            *FAST,
        ]
    )

    assert code == EXIT_OK
    with open(os.path.join(out, "results.csv"), encoding="utf-8") as f:
        assert len(list(csv.DictReader(f))) == 4

    with open(os.path.join(out, "config.json"), encoding="utf-8") as f:
        saved = json.load(f)

    assert saved["command"] == "report"
    assert saved["config"]["experiment.seeds"] == [0, 1]
    assert saved["config"]["train.epochs"] == 20
    assert os.path.exists(os.path.join(out, "report.html"))


def test_config_file(tmp_path, dataset_dir):
    conf = tmp_path / "lab.conf"
    conf.write_text(
        f"dataset.path = {dataset_dir}\nexperiment.attacks = identity\n", encoding="utf-8"
    )
    out = str(tmp_path / "out")

    assert main(["report", "-c", str(conf), f"--out={out}", *FAST]) == EXIT_OK
    with open(os.path.join(out, "results.csv"), encoding="utf-8") as f:
        assert [row["attack"] for row in csv.DictReader(f)] == ["identity"]


def test_attack_then_defend_eval(tmp_path, dataset_dir, toy_graph):
    out = str(tmp_path / "out")
    common = [f"--out={out}", f"--dataset.path={dataset_dir}", "--seed", "0", *FAST]

    assert main(["attack", "--attack", "random", "--budget", "0.1", *common]) == EXIT_OK
    attacked_dir = os.path.join(out, "attacks", "toy", "random", "b0.1", "s0")
    assert load_graph(attacked_dir).n == toy_graph.n

    code = main(["defend-eval", f"--input={attacked_dir}", "--defense", "none", "svd", *common])
    assert code == EXIT_OK

    with open(os.path.join(out, "defend_eval.json"), encoding="utf-8") as f:
        metrics = json.load(f)["metrics"]

    assert [entry["defense"] for entry in metrics] == ["none", "svd"]


def test_csbm_gen(tmp_path):
    out = str(tmp_path / "out")
    code = main(
        [
            "csbm-gen",
            f"--out={out}",
            "--seed", "3",
            "--csbm.n=40",
            "--csbm.p_in=0.2",
            "--csbm.q_out=0.05",
            "--csbm.feat_dim=3",
        ]
    )

    assert code == EXIT_OK
    graph = load_graph(os.path.join(out, "csbm", "s3"))
    assert graph.n == 40 and graph.d == 3


def _rows(out, name="results.csv"):
    with open(os.path.join(out, name), encoding="utf-8") as f:
        return list(csv.DictReader(f))


def test_train_writes_checkpoint(tmp_path):
    out = str(tmp_path / "out")

    assert main(["train", f"--out={out}", "--seed", "2", *TINY_CSBM, *FAST]) == EXIT_OK
    params, header = load_checkpoint(os.path.join(out, "surrogate.ckpt"))

    assert (header["d"], header["h"], header["c"]) == (3, 8, 2)
    assert params.w1.shape == (3, 8)


def test_detect_on_tiny_csbm(tmp_path):
    out = str(tmp_path / "out")
    code = main(
        [
            "detect",
            f"--out={out}",
            "--attack", "random", "ahsg",
            "--budget", "0.1",
            "--seed", "0", "1",
            *TINY_CSBM,
            *FAST,
            *SHORT_ATTACKS,
        ]
    )

    assert code == EXIT_OK
    assert {row["attack"] for row in _rows(out)} == {"identity", "random", "ahsg"}
    with open(os.path.join(out, "summary.json"), encoding="utf-8") as f:
        semantic = json.load(f)["semantic"]

    assert [row["attack"] for row in semantic["rows"]] == ["random", "ahsg"]
    assert all(0 <= row["bayes_maintain"] <= 1 for row in semantic["rows"])


def test_sweep_writes_plot_data(tmp_path):
    out = str(tmp_path / "out")
    code = main(
        [
            "sweep",
            f"--out={out}",
            "--param", "budget",
            "--values", "0.05", "0.1",
            "--attack", "random",
            "--defense", "none",
            "--seed", "0",
            *TINY_CSBM,
            *FAST,
        ]
    )

    assert code == EXIT_OK
    rows = _rows(out, os.path.join("plotdata", "sweep_budget.csv"))
    assert [float(row["value"]) for row in rows] == [0.05, 0.1]
    assert all(row["n_seeds"] == "1" for row in rows)


def test_ablate_runs_every_variant(tmp_path):
    out = str(tmp_path / "out")
    code = main(
        ["ablate", f"--out={out}", "--defense", "none", "--seed", "0", *TINY_CSBM, *FAST, *SHORT_ATTACKS]
    )

    assert code == EXIT_OK
    rows = _rows(out)
    assert {(row["attack"], float(row["budget"])) for row in rows} == {
        (attack, budget) for attack in ("ahsg", "ahsg-rec", "ahsg-hid") for budget in (0.05, 0.1)
    }
    assert all(row["status"] == "ok" for row in rows)


def test_config_errors_exit_with_one(tmp_path, dataset_dir):
    out = f"--out={tmp_path / 'out'}"

    assert main(["report", out, "--bogus.key=1"]) == EXIT_CONFIG
    assert main(["report", out, "--train.epochs=zero"]) == EXIT_CONFIG
    assert main(["report", out, f"--dataset.path={dataset_dir}", "--attack", "nettack"]) == EXIT_CONFIG
    assert main(["sweep", out, f"--dataset.path={dataset_dir}", "--param", "lr", "--values", "1"]) == EXIT_CONFIG
    assert main(["defend-eval", out]) == EXIT_CONFIG


def test_runtime_errors_exit_with_two(tmp_path):
    code = main(["defend-eval", f"--out={tmp_path / 'out'}", f"--input={tmp_path / 'missing'}"])
    assert code == EXIT_RUNTIME
