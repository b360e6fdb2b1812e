#!/usr/bin/env python3
"""End-to-end checks of the command-line tool: exit codes, output files and JSON schemas."""

import argparse
import json
import subprocess
import sys
import tempfile
from pathlib import Path

import jsonschema

FAILURES = []


def case(name):
    def wrap(fn):
        def run(*a):
            try:
                fn(*a)
                print(f"ok   {name}")
            except AssertionError as e:
                FAILURES.append(name)
                print(f"FAIL {name}: {e}")
        return run
    return wrap


def cli(args, *extra):
    return subprocess.run([args.cli, *extra], capture_output=True, text=True, timeout=300)


def minimal(**changes):
    doc = {
        "schema_version": 1,
        "id": "cli-tiny",
        "model": {"family": "base", "n": 2, "A": [[0.5, 0.5], [0.25, 0.75]], "epsilon": 0.4,
                  "sigma_bar": 1.0, "x0": [0, 2]},
        "horizon": 50,
        "checks": [{"name": "base_rates", "expect": True}],
    }
    doc.update(changes)
    return doc


def write(tmp, name, doc):
    path = Path(tmp) / name
    path.write_text(doc if isinstance(doc, str) else json.dumps(doc))
    return str(path)


@case("list prints every catalog id")
def test_list(args, schemas, tmp):
    r = cli(args, "list")
    assert r.returncode == 0, r.stderr
    manifest = json.loads((Path(args.scenarios) / "manifest.json").read_text())
    for entry in manifest["entries"]:
        assert entry["id"] in r.stdout, entry["id"]


@case("catalog files satisfy the scenario schema")
def test_catalog_schema(args, schemas, tmp):
    for f in sorted(Path(args.scenarios).glob("*.json")):
        if f.name == "manifest.json":
            continue
        jsonschema.validate(json.loads(f.read_text()), schemas["scenario"])


@case("run --json emits a schema-valid summary")
def test_run_json(args, schemas, tmp):
    r = cli(args, "run", "base-3agent", "--json")
    assert r.returncode == 0, r.stderr
    summary = json.loads(r.stdout)
    jsonschema.validate(summary, schemas["summary"])
    assert summary["passed"] is True
    assert summary["scenario"] == "base-3agent"


@case("run writes trajectory, ensemble and summary files")
def test_run_files(args, schemas, tmp):
    out = Path(tmp) / "files"
    r = cli(args, "run", "noisy-inverse-t", "--out-dir", str(out), "--ensemble", "40")
    assert r.returncode == 0, r.stdout + r.stderr
    case_dir = out / "noisy-inverse-t"
    for f in ("trajectory.csv", "ensemble.csv", "summary.json"):
        assert (case_dir / f).is_file(), f
    summary = json.loads((case_dir / "summary.json").read_text())
    jsonschema.validate(summary, schemas["summary"])
    assert summary["ensemble"] == 40
    lines = (case_dir / "ensemble.csv").read_text().splitlines()
    assert lines[0] == "run,component_0,component_1,component_2"
    assert len(lines) == 41
    header = (case_dir / "trajectory.csv").read_text().splitlines()[0]
    assert header == "t,component_0,component_1,component_2,err_inf,osc"


@case("stats re-analyses a saved ensemble")
def test_stats(args, schemas, tmp):
    out = Path(tmp) / "stats"
    r = cli(args, "run", "average-line", "--out-dir", str(out), "--ensemble", "200", "--horizon", "100")
    assert r.returncode == 0, r.stdout + r.stderr
    r = cli(args, "stats", str(out / "average-line" / "ensemble.csv"), "--t-final", "100")
    assert r.returncode == 0, r.stderr
    s = json.loads(r.stdout)
    assert s["m"] == 200 and s["n"] == 2
    assert len(s["covariance"]) == 2
    assert 0.0 <= s["rank_one_score"] <= 1.0
    assert len(s["ks_normal_fit"]) == 2


@case("ensemble output does not depend on the thread count")
def test_threads(args, schemas, tmp):
    texts = []
    for threads in ("1", "3"):
        out = Path(tmp) / f"threads{threads}"
        r = cli(args, "run", "gaussian-dist", "--out-dir", str(out),
                "--threads", threads)
        assert r.returncode == 0, r.stdout + r.stderr
        texts.append((out / "gaussian-dist" / "ensemble.csv").read_bytes())
    assert texts[0] == texts[1]


@case("check evaluates conditions only")
def test_check(args, schemas, tmp):
    r = cli(args, "check", "rho-harmonic", "--json")
    assert r.returncode == 0, r.stderr
    summary = json.loads(r.stdout)
    jsonschema.validate(summary, schemas["summary"])
    assert summary["analyses"] == []
    assert [c["name"] for c in summary["checks"]] == ["product_to_zero", "bounded_product_sums"]


@case("reproduce passes for every catalog case")
def test_reproduce_all(args, schemas, tmp):
    manifest = json.loads((Path(args.scenarios) / "manifest.json").read_text())
    for entry in manifest["entries"]:
        r = cli(args, "reproduce", entry["id"])
        assert r.returncode == 0, entry["id"] + ":\n" + r.stdout + r.stderr


@case("unmet expectation exits 1")
def test_failure_exit(args, schemas, tmp):
    path = write(tmp, "fail.json", minimal(checks=[{"name": "base_rates", "expect": False}]))
    r = cli(args, "run", path)
    assert r.returncode == 1, (r.returncode, r.stdout, r.stderr)
    assert "FAIL" in r.stdout


@case("user scenario file runs")
def test_user_file(args, schemas, tmp):
    doc = minimal()
    jsonschema.validate(doc, schemas["scenario"])
    r = cli(args, "run", write(tmp, "ok.json", doc))
    assert r.returncode == 0, r.stdout + r.stderr


@case("configuration errors exit 2 with a pointer")
def test_config_errors(args, schemas, tmp):
    bad_size = minimal(ensemble={"size": -1})
    try:
        jsonschema.validate(bad_size, schemas["scenario"])
        raise AssertionError("schema accepted a negative ensemble size")
    except jsonschema.ValidationError:
        pass
    r = cli(args, "run", write(tmp, "neg.json", bad_size))
    assert r.returncode == 2, (r.returncode, r.stderr)
    assert "/ensemble/size" in r.stderr, r.stderr

    r = cli(args, "run", write(tmp, "broken.json", "{ not json"))
    assert r.returncode == 2, r.stderr

    r = cli(args, "run", "no-such-case")
    assert r.returncode == 2 and "known" in r.stderr, r.stderr

    r = cli(args, "run", "base-3agent", "--tol", "bogus=1")
    assert r.returncode == 2 and "bogus" in r.stderr, r.stderr

    r = cli(args, "run", "base-3agent", "--tol", "consensus_tol=abc")
    assert r.returncode == 2, r.stderr

    r = cli(args, "reproduce", write(tmp, "file.json", minimal()))
    assert r.returncode == 2, r.stderr

    r = cli(args, "stats", str(Path(tmp) / "missing.csv"))
    assert r.returncode == 2, r.stderr

    r = cli(args)
    assert r.returncode == 2

    r = cli(args, "run", "base-3agent", "--horizon", "-5")
    assert r.returncode == 2


@case("help exits 0")
def test_help(args, schemas, tmp):
    r = cli(args, "--help")
    assert r.returncode == 0
    assert "reproduce" in r.stdout


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--cli", required=True)
    p.add_argument("--schemas", required=True)
    p.add_argument("--scenarios", required=True)
    args = p.parse_args()
    schemas = {
        "scenario": json.loads((Path(args.schemas) / "scenario.schema.json").read_text()),
        "summary": json.loads((Path(args.schemas) / "summary.schema.json").read_text()),
    }
    for s in schemas.values():
        jsonschema.Draft202012Validator.check_schema(s)
    tests = [test_list, test_catalog_schema, test_run_json, test_run_files, test_stats, test_threads, test_check,
             test_reproduce_all, test_failure_exit, test_user_file, test_config_errors, test_help]
    with tempfile.TemporaryDirectory() as tmp:
        for t in tests:
            t(args, schemas, tmp)
    if FAILURES:
        print(f"{len(FAILURES)} failing: {', '.join(FAILURES)}")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
