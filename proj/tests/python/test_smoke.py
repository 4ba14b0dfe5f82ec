"""Smoke tests for the python bindings and the CLI surface."""

import json
import math
import os
import subprocess
import sys

import pytest

import specjac


def test_softmax_uniform_and_worked_example():
    probs = specjac.softmax([0.0, 0.0, 0.0]).probs
    assert probs == pytest.approx([1 / 3] * 3, abs=1e-12)
    probs = specjac.softmax([0.0, math.log(2.0), math.log(4.0)]).probs
    assert probs == pytest.approx([1 / 7, 2 / 7, 4 / 7], abs=1e-12)


def test_tv_distance_and_residual():
    p = specjac.Distribution([0.5, 0.5])
    q = specjac.Distribution([0.9, 0.1])
    assert specjac.tv_distance(p, q) == pytest.approx(0.4, abs=1e-12)
    res = specjac.residual_distribution(q, p)
    assert res.probs == pytest.approx([1.0, 0.0])


def test_drafter_primitives():
    assert specjac.ewa_reference([0.3, 0.5], 0.8, 1) == pytest.approx(0.74 / 1.8, abs=1e-12)
    assert specjac.prediction_score(0.4, 0.2) == pytest.approx(math.log(2.0), abs=1e-12)
    assert specjac.growth_mask([0.1, 0.2, 0.3, 0.4], 3) == 1
    assert specjac.growth_mask([0.1, 0.3, 0.25, 0.4], 3) == 0
    fused = specjac.bayesian_fusion(
        specjac.Distribution([0.4, 0.3, 0.2, 0.1]),
        [0.0, math.log(2.0), 0.0, 0.0],
        [0, 1, 0, 0],
        [0, 1],
    )
    assert fused.probs == pytest.approx([4 / 13, 6 / 13, 2 / 13, 1 / 13], abs=1e-9)


def test_markov_model_build_and_exact_enumeration():
    m = specjac.MarkovModel.build(seed=7, order=1, vocab=8, concentration=0.5)
    m2 = specjac.MarkovModel.build(seed=7, order=1, vocab=8, concentration=0.5)
    assert m.row(0).probs == m2.row(0).probs
    row = m.next_token_distribution([3])
    assert sum(row.probs) == pytest.approx(1.0, abs=1e-9)

    prompt = specjac.Prompt(0, [1], 3)
    exact = specjac.exact_sequence_distribution(m, prompt)
    assert len(exact.probs) == 64
    assert sum(exact.probs) == pytest.approx(1.0, abs=1e-9)


def test_model_save_load_roundtrip(tmp_path):
    m = specjac.MarkovModel.build(seed=11, order=1, vocab=4, concentration=0.4,
                                  attractor_weight=0.25)
    path = str(tmp_path / "model.txt")
    m.save(path)
    loaded = specjac.MarkovModel.load(path)
    assert loaded.row(2).probs == m.row(2).probs


def test_decoders_run_and_are_deterministic():
    m = specjac.MarkovModel.build(seed=7, order=1, vocab=8, concentration=0.5,
                                  attractor_weight=0.3)
    prompt = specjac.Prompt(0, [1], 16)
    tokens, nfe = specjac.autoregressive_decode(m, prompt, seed=5)
    assert len(tokens) == 16 and nfe == 15

    jt, jstats = specjac.run_greedy_jacobi(m, prompt, window=4)
    assert len(jt) == 16 and jstats.nfe >= 1

    for decoder in ("sjd", "sjd-vp"):
        t1, s1 = specjac.run_speculative_jacobi(m, prompt, 4, decoder, seed=9)
        t2, s2 = specjac.run_speculative_jacobi(m, prompt, 4, decoder, seed=9)
        assert t1 == t2
        assert s1.nfe == s2.nfe
        assert len(t1) == 16
        assert sum(s1.run_lengths) + s1.corrections == s1.generated


def test_speculative_decoding_is_lossless_at_small_scale():
    m = specjac.MarkovModel.build(seed=6, order=1, vocab=4, concentration=0.5)
    prompt = specjac.Prompt(0, [0], 3)
    exact = specjac.exact_sequence_distribution(m, prompt)
    runs = 20000
    counts = [0.0] * len(exact.probs)
    for i in range(runs):
        tokens, _ = specjac.run_speculative_jacobi(m, prompt, 2, "sjd-vp",
                                                   seed=specjac.SeededRng.derive(50, i))
        counts[tokens[1] * 4 + tokens[2]] += 1.0
    tv = 0.5 * sum(abs(c / runs - p) for c, p in zip(counts, exact.probs))
    assert tv <= 0.06


def test_theory_helpers():
    p = specjac.Distribution([0.5, 0.5])
    q = specjac.Distribution([0.9, 0.1])
    y, ties = specjac.ideal_direction(p, q)
    assert y == [1, -1] and ties == 0
    spec = specjac.PerturbationSpec(0.1, [1.0, 1.0], [1, -1])
    assert specjac.exact_tv_delta(p, q, spec) == pytest.approx(-0.1, abs=1e-12)
    assert specjac.first_order_tv_delta(p, q, spec) == pytest.approx(-0.1, abs=1e-12)


CLI = os.environ.get("SPECJAC_CLI")

needs_cli = pytest.mark.skipif(not CLI, reason="SPECJAC_CLI not set")


@needs_cli
def test_cli_decode_bench_and_exit_codes(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "model.vocab = 8\nprompts.count = 2\nprompts.target_len = 16\n"
        "window = 4\nseeds = 1\n"
    )
    out = subprocess.run([CLI, "decode", "--config", str(cfg), "--decoder", "sjd-vp"],
                         capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert "nfe=" in out.stdout

    bench_dir = tmp_path / "bench"
    out = subprocess.run([CLI, "bench", "--config", str(cfg), "--out", str(bench_dir)],
                         capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    report = json.loads((bench_dir / "report.json").read_text())
    assert report["schema"] == "specjac-report-v1"
    assert (bench_dir / "timing.json").exists()

    # config error -> exit 2
    bad = tmp_path / "bad.cfg"
    bad.write_text("no.such.key = 1\n")
    out = subprocess.run([CLI, "bench", "--config", str(bad)], capture_output=True)
    assert out.returncode == 2

    # safety-valve abort -> exit 3
    valve = tmp_path / "valve.cfg"
    valve.write_text("model.vocab = 8\nprompts.count = 1\nprompts.target_len = 16\n"
                     "window = 4\nseeds = 1\nmax_iter_factor = 0\ndecoder = sjd\n")
    out = subprocess.run([CLI, "decode", "--config", str(valve)], capture_output=True)
    assert out.returncode == 3


@needs_cli
def test_cli_jsonl_analyze_pipeline(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "model.vocab = 8\nmodel.concentration = 0.3\nprompts.count = 1\n"
        "prompts.target_len = 40\nwindow = 6\nseeds = 1\ndecoder = sjd-vp\n"
    )
    jsonl = tmp_path / "traj.jsonl"
    out = subprocess.run([CLI, "decode", "--config", str(cfg), "--jsonl", str(jsonl)],
                         capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert jsonl.exists()

    analysis_dir = tmp_path / "analysis"
    out = subprocess.run([CLI, "analyze", "--jsonl", str(jsonl), "--out", str(analysis_dir)],
                         capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    summary = json.loads((analysis_dir / "analysis.json").read_text())
    assert summary["mask_check"]["mismatches"] == 0

    # mixed fingerprints -> exit 4
    other = tmp_path / "other.jsonl"
    text = jsonl.read_text().replace('"fingerprint":"', '"fingerprint":"x', 1)
    other.write_text(text)
    out = subprocess.run([CLI, "analyze", "--jsonl", str(jsonl), str(other),
                          "--out", str(analysis_dir)], capture_output=True)
    assert out.returncode == 4


@needs_cli
def test_cli_sweep_and_theory(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "model.vocab = 8\nprompts.count = 2\nprompts.target_len = 12\n"
        "window = 3\nseeds = 1\ndecoders = sjd,sjd-vp\n"
    )
    out_dir = tmp_path / "sweep"
    out = subprocess.run([CLI, "sweep", "--config", str(cfg), "--knob", "gamma",
                          "--values", "0.4,0.8", "--out", str(out_dir)],
                         capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    csv = (out_dir / "sweep_gamma.csv").read_text()
    assert csv.startswith("knob,value,decoder")

    theory_dir = tmp_path / "theory"
    out = subprocess.run([CLI, "theory-check", "--trials", "50", "--taylor-trials", "200",
                          "--out", str(theory_dir)], capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert (theory_dir / "theory_trials.csv").read_text().count("\n") > 100
