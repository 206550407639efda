"""Exchange-format checks: dataset JSONL, weight files and metrics JSON against their schemas,
plus a trained-style export (learned positions, no construction) evaluated by the CLI."""
import json
import random
import subprocess
import sys
import tempfile
from pathlib import Path

import jsonschema

ROOT = Path(__file__).resolve().parent.parent
SCHEMAS = {name: json.loads((ROOT / "interfaces" / f"{name}.schema.json").read_text())
           for name in ("dataset_line", "weights", "metrics")}


def run(binary, *args):
    res = subprocess.run([binary, *args], capture_output=True, text=True)
    if res.returncode != 0:
        sys.exit(f"command failed ({res.returncode}): {' '.join(args)}\n{res.stderr}")
    return res.stdout


def validate(kind, doc):
    jsonschema.validate(doc, SCHEMAS[kind])


def matrix(rows, cols, rng, scale=0.5):
    return {"rows": rows, "cols": cols, "data": [rng.uniform(-scale, scale) for _ in range(rows * cols)]}


def trained_export(k, d, positions, rng):
    """Random body, zero output head: the predicted distribution is uniform whatever the input."""
    K = 2 * k + 2
    block = {
        "name": "layer0",
        "attention": {"wq": matrix(d, d, rng), "wk": matrix(d, d, rng), "wv": matrix(d, d, rng),
                      "mode": "softmax", "selection": False, "qk_norm": None},
        "ffn": {"w1": matrix(2 * d, d, rng), "w2": matrix(d, 2 * d, rng),
                "gamma": [1.0] * (2 * d), "beta": [0.0] * (2 * d), "norm": "rms"},
    }
    return {
        "schema_version": 1, "task": "dyck-gen", "k": k, "d_model": d,
        "positional_encoding": "learned",
        "embedding": matrix(d, K, rng), "pos": matrix(d, positions, rng),
        "blocks": [block],
        "head": {"kind": "generator", "W": {"rows": K, "cols": d, "data": [0.0] * (K * d)}, "bias": [0.0] * K},
        "construction": None, "gen": None,
    }


def main():
    binary = sys.argv[1]
    rng = random.Random(5)
    with tempfile.TemporaryDirectory() as tmp:
        t = Path(tmp)
        for lang in ("dyck", "shuffle"):
            path = t / f"{lang}.jsonl"
            run(binary, "gen-data", "--lang", lang, "--k", "3", "--seed", "1", "--count", "100", "--n-max", "20",
                "--split", "test", "--out", str(path))
            lines = path.read_text().splitlines()
            assert len(lines) == 100
            for line in lines:
                validate("dataset_line", json.loads(line))

        for task in ("dyck-rec", "dyck-gen", "shuffle-rec", "shuffle-gen", "dyck-rec-nobos", "dyck-gen-nobos"):
            w = t / f"{task}.json"
            run(binary, "build", "--task", task, "--k", "3", "--n-max", "32", "--out", str(w))
            validate("weights", json.loads(w.read_text()))
        run(binary, "convert", "--weights", str(t / "dyck-rec.json"), "--to", "qk-ln", "--out", str(t / "conv.json"))
        validate("weights", json.loads((t / "conv.json").read_text()))

        k = 3
        export = trained_export(k, 6, 32, rng)
        validate("weights", export)
        (t / "export.json").write_text(json.dumps(export))
        info = json.loads(run(binary, "info", "--weights", str(t / "export.json")))
        assert info["positional_encoding"] == "learned" and info["construction"] is None

        metrics = t / "m.json"
        run(binary, "eval", "--weights", str(t / "export.json"), "--data", str(t / "dyck.jsonl"),
            "--metric", "acc-closed", "--n-max", "20", "--out", str(metrics))
        m = json.loads(metrics.read_text())
        validate("metrics", m)
        for split in ("id", "ood"):
            value = m["splits"][split]["acc_closed"]
            assert abs(value - 1.0 / k) < 1e-6, (split, value)

        run(binary, "eval", "--weights", str(t / "dyck-gen.json"), "--data", str(t / "dyck.jsonl"),
            "--metric", "tv", "--n-max", "20", "--out", str(metrics))
        validate("metrics", json.loads(metrics.read_text()))
        run(binary, "eval", "--weights", str(t / "shuffle-rec.json"), "--data", str(t / "shuffle.jsonl"),
            "--metric", "recognition", "--seed", "3", "--out", str(metrics))
        validate("metrics", json.loads(metrics.read_text()))
    print("interfaces ok")


if __name__ == "__main__":
    main()
