# Copyright 2026 The sgformer-cpp Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import csv
import json
import pathlib

import numpy as np
import pytest

import sgformer

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"
BENCH_HEADER = ["n", "e", "variant", "fwd_ms", "fwd_bwd_ms", "peak_bytes", "repeats"]
EPOCH_KEYS = ["epoch", "loss", "train", "valid", "test", "ms"]


def test_attention_forms_agree():
    rng = np.random.default_rng(0)
    q, k, v = (rng.standard_normal((40, 6)) for _ in range(3))
    z_lin = sgformer.attention_linear(q, k, v)
    z_ex, c = sgformer.attention_explicit(q, k, v)
    assert z_lin.shape == (40, 6)
    np.testing.assert_allclose(c.sum(axis=1), 1.0, rtol=0, atol=1e-12)
    assert np.abs(z_lin - z_ex).max() <= 1e-10 * np.abs(z_ex).max()


def test_attention_rejects_zero_queries():
    z = np.zeros((4, 2))
    with pytest.raises(ArithmeticError):
        sgformer.attention_linear(z, np.ones((4, 2)), np.ones((4, 2)))


def test_synth_train_eval(tmp_path):
    data = tmp_path / "sbm"
    sgformer.synth(str(data), nodes=200, classes=2, p_in=0.05, p_out=0.005, seed=1)
    ds = sgformer.load_dataset(str(data))
    assert ds["num_nodes"] == 200
    assert ds["features"].shape == (200, 16)
    assert len(ds["train"]) + len(ds["valid"]) + len(ds["test"]) == 200

    ckpt = tmp_path / "model.ckpt"
    r = sgformer.train(str(data), epochs=20, hidden=16, checkpoint=str(ckpt), timing=False)
    assert len(r["epochs"]) == 20
    assert list(r["epochs"][0].keys()) == EPOCH_KEYS
    valid, test = sgformer.evaluate(str(data), str(ckpt))
    assert valid == r["best_valid"]
    assert test == r["best_test"]
    again = sgformer.train(str(data), epochs=20, hidden=16, timing=False)
    assert again["epochs"] == r["epochs"]


def test_bad_config_raises(tmp_path):
    data = tmp_path / "sbm"
    sgformer.synth(str(data), nodes=50, seed=2)
    with pytest.raises(ValueError):
        sgformer.train(str(data), lr=-1.0)
    with pytest.raises(ValueError):
        sgformer.load_dataset(str(tmp_path / "missing"))


def test_verify_report():
    ok, text = sgformer.verify(seed=3, trials=1)
    assert ok
    assert text.count("[PASS]") >= 5


def test_scaling_csv_schema():
    text = sgformer.run_scaling([64, 128], hidden=16, timing=False)
    rows = list(csv.reader(text.splitlines()))
    assert rows[0] == BENCH_HEADER
    assert [r[2] for r in rows[1:]] == ["linear", "explicit", "linear", "explicit"]


def test_fixtures_match_schemas():
    with open(FIXTURES / "bench_sample.csv", newline="") as f:
        rows = list(csv.reader(f))
    assert rows[0] == BENCH_HEADER
    assert {r[2] for r in rows[1:]} <= {"linear", "explicit"}

    lines = (FIXTURES / "metrics_sample.jsonl").read_text().splitlines()
    records = [json.loads(line) for line in lines]
    assert all(list(r.keys()) == EPOCH_KEYS for r in records[:-1])
    assert records[-1]["summary"] is True
    assert len(records) - 1 == records[-1]["epochs"]
