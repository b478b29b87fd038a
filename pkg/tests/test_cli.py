from __future__ import annotations

import re
import subprocess
import sys

import pytest

from epimdr.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, build_parser, main
from epimdr.cohort import GeneratorConfig, PlantedSignal
from epimdr.distributed import ClusterConfig
from epimdr.engine import default_threads
from epimdr.mdr import MdrConfig


def help_text(command: str) -> str:
    parser = build_parser()
    sub = next(a for a in parser._actions if a.dest == "command").choices[command]
    return sub.format_help()


def parse_help_defaults(text: str) -> dict[str, str]:
    """Map each long flag to the value shown in its '(default: ...)' note."""
    entries: list[list[str]] = []
    for line in text.splitlines():
        if re.match(r"^\s{2}-", line):
            entries.append([line])
        elif entries and line.startswith(" " * 8):
            entries[-1].append(line)
    out = {}
    for entry in entries:
        joined = " ".join(s.strip() for s in entry)
        flag = re.findall(r"--[a-z][a-z-]*", joined.split("  ")[0])
        default = re.search(r"\(default: (.*?)\)$", joined)
        if flag and default:
            out[flag[-1]] = default.group(1)
    return out


class TestHelpDefaults:
    def test_run_flags_match_library(self):
        d = parse_help_defaults(help_text("run"))
        cfg = MdrConfig()
        assert d["--k"] == str(cfg.k)
        assert float(d["--top-fraction"]) == cfg.top_fraction
        assert d["--empty-cell-policy"] == cfg.empty_cell_policy.value
        assert d["--tie-policy"] == cfg.tie_policy.value
        assert d["--kernel"] == cfg.kernel.value == "bitpacked"
        assert d["--seed"] == str(cfg.seed)
        assert d["--pair-mode"] == "cross"
        assert d["--threads"] == str(default_threads())

    def test_generate_flags_match_library(self):
        d = parse_help_defaults(help_text("generate"))
        gen, plant = GeneratorConfig(), PlantedSignal(0, 0, 0, 1)
        assert d["--files"] == str(gen.n_files)
        assert d["--variants"] == str(gen.variants_per_file)
        assert d["--patients"] == str(gen.n_patients)
        assert float(d["--case-fraction"]) == gen.case_fraction
        assert d["--seed"] == str(gen.seed)
        assert float(d["--p-case-high"]) == plant.p_case_high
        assert float(d["--p-case-low"]) == plant.p_case_low

    def test_serve_flags_match_library(self):
        d = parse_help_defaults(help_text("serve"))
        CLUSTER_DEFAULTS = ClusterConfig()
        assert d["--workers"] == str(CLUSTER_DEFAULTS.expected_workers)
        assert d["--mode"] == CLUSTER_DEFAULTS.distribution_mode.value
        assert d["--worker-threads"] == str(CLUSTER_DEFAULTS.threads_per_worker)
        assert d["--k"] == "5"
        assert float(d["--timeout"]) == CLUSTER_DEFAULTS.handshake_timeout

    @pytest.mark.parametrize("command", ["generate", "run", "select", "bench", "serve", "work", "report"])
    def test_every_flag_documents_a_default(self, command):
        text = help_text(command)
        flags = set(re.findall(r"^\s{2}(?:-\w, )?(--[a-z][a-z-]*)", text, re.M)) - {"--help"}
        documented = parse_help_defaults(text)
        assert flags <= set(documented), flags - set(documented)


def test_generate_and_run(tmp_path, capsys):
    data = tmp_path / "d"
    assert main(["generate", "--files", "2", "--variants", "5", "--patients", "60", "--seed", "7", "--out", str(data)]) == EXIT_OK
    printed = capsys.readouterr().out.splitlines()
    assert printed == ["f000.csv.gz", "f001.csv.gz", "labels.csv"]
    args = ["run", "--files", str(data / "f000.csv.gz"), str(data / "f001.csv.gz"), "--labels", str(data / "labels.csv"),
            "--k", "5", "--threads", "2"]
    assert main(args + ["--out", str(tmp_path / "a.csv")]) == EXIT_OK
    assert main(args + ["--out", str(tmp_path / "b.csv"), "--threads", "1"]) == EXIT_OK
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert main(["run", "--manifest", str(data / "manifest.txt"), "--kernel", "scalar", "--out", str(tmp_path / "c.csv")]) == EXIT_OK
    assert (tmp_path / "c.csv").read_bytes() == (tmp_path / "a.csv").read_bytes()


def test_run_missing_labels(tmp_path, capsys, small_cohort):
    missing = tmp_path / "labels_missing.csv"
    code = main(["run", "--files", str(small_cohort.genotype_files[0]), "--labels", str(missing), "--out", str(tmp_path / "r.csv")])
    assert code == EXIT_DATA
    assert str(missing) in capsys.readouterr().err


def test_run_bad_data(tmp_path, capsys):
    g = tmp_path / "g.csv"
    g.write_text("22,1,A,G,1,1,0,0,1,0\n")
    labels = tmp_path / "l.csv"
    labels.write_text("P1,1\nP2,0\n")
    assert main(["run", "--files", str(g), "--labels", str(labels), "--out", str(tmp_path / "r.csv")]) == EXIT_DATA


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as info:
        main(["run", "--k", "notanint"])
    assert info.value.code == EXIT_USAGE
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == EXIT_USAGE
    assert main(["run", "--threads", "1"]) == EXIT_USAGE


def test_select_rerank(tmp_path, small_cohort, capsys):
    out = tmp_path / "r.csv"
    assert main(["run", "--manifest", str(small_cohort.root / "manifest.txt"), "--out", str(out), "--threads", "1"]) == EXIT_OK
    capsys.readouterr()
    assert main(["select", "--results", str(out), "--top-fraction", "0.5"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("file_a,index_a")
    assert len(lines) == 1 + 3 * 36
    assert main(["select", "--results", str(out), "--top-fraction", "0.2", "--out", str(tmp_path / "s.csv")]) == EXIT_OK
    assert (tmp_path / "s.csv").read_bytes() == out.read_bytes()


def test_bench_and_report(tmp_path, small_cohort, capsys):
    out = tmp_path / "bench.json"
    code = main(["bench", "--data", str(small_cohort.root), "--files-grid", "1,2", "--threads-grid", "1,2",
                 "--kernels", "bitpacked,scalar", "--reps", "1", "--freq-hz", "1.2e9", "--out", str(out)])
    assert code == EXIT_OK
    capsys.readouterr()
    assert main(["report", "--input", str(out), "--format", "csv", "--out", str(tmp_path / "b.csv")]) == EXIT_OK
    summary = capsys.readouterr().out.splitlines()
    assert len(summary) == 8
    assert (tmp_path / "b.csv").read_text().splitlines()[0].startswith("files,threads,workers,kernel,rep")


def test_serve_and_work_processes(tmp_path, small_cohort):
    import socket

    s = socket.socket()
    s.bind(("127.0.0.1", 0))
    port = s.getsockname()[1]
    s.close()
    out = tmp_path / "cluster.csv"
    serve = subprocess.Popen(
        [sys.executable, "-m", "epimdr", "serve", "--listen", f"127.0.0.1:{port}", "--workers", "2",
         "--mode", "preloaded", "--manifest", str(small_cohort.root / "manifest.txt"), "--out", str(out),
         "--timeout", "60"],
        stderr=subprocess.PIPE, text=True,
    )
    workers = [
        subprocess.Popen([sys.executable, "-m", "epimdr", "work", "--connect", f"127.0.0.1:{port}",
                          "--data", str(small_cohort.root)], stderr=subprocess.PIPE, text=True)
        for _ in range(2)
    ]
    assert serve.wait(timeout=120) == 0, serve.stderr.read()
    for w in workers:
        assert w.wait(timeout=60) == 0, w.stderr.read()
    local = tmp_path / "local.csv"
    assert main(["run", "--manifest", str(small_cohort.root / "manifest.txt"), "--out", str(local), "--threads", "1"]) == EXIT_OK
    assert out.read_bytes() == local.read_bytes()


def test_work_without_coordinator():
    import socket

    s = socket.socket()
    s.bind(("127.0.0.1", 0))
    port = s.getsockname()[1]
    s.close()
    proc = subprocess.run([sys.executable, "-m", "epimdr", "work", "--connect", f"127.0.0.1:{port}"],
                          capture_output=True, text=True, timeout=60)
    assert proc.returncode == 3
