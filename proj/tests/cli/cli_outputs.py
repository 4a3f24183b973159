"""Runs the command line tool on small configs and validates every output against the schemas."""

import decimal
import json
import math
import pathlib
import subprocess
import sys
import tempfile

import jsonschema
from referencing import Registry, Resource

BIN = pathlib.Path(sys.argv[1])
SCHEMAS = pathlib.Path(sys.argv[2])

registry = Registry()
for path in SCHEMAS.glob("*.schema.json"):
    registry = registry.with_resource(path.name, Resource.from_contents(json.loads(path.read_text())))

failures = []


def validator(name):
    schema = json.loads((SCHEMAS / f"{name}.schema.json").read_text())
    return jsonschema.Draft7Validator(schema, registry=registry)


def expect(cond, what):
    print(("ok   " if cond else "FAIL ") + what)
    if not cond:
        failures.append(what)


def validate(name, doc, what):
    errors = list(validator(name).iter_errors(doc))
    expect(not errors, f"{what} matches {name} schema" + (f": {errors[0].message}" if errors else ""))


def run(tmp, config, *args):
    cfg = tmp / f"cfg_{abs(hash(json.dumps(config, sort_keys=True)))}.json"
    cfg.write_text(json.dumps(config))
    validate("run_config", config, f"config for {config.get('command', args[:1])}")
    return subprocess.run([str(BIN), "--config", str(cfg), *args], capture_output=True, text=True)


WIGNER = {"kind": "additive", "nu": {"type": "dirac", "location": 0}, "sigma": 1}
COV = {"kind": "multiplicative", "nu": {"type": "dirac", "location": 1}, "c": 0.5}
PM_ONE = {"type": "atomic", "atoms": [{"location": -1, "weight": 0.5}, {"location": 1, "weight": 0.5}]}
ISO = {"kind": "isotropic_additive", "mu": PM_ONE, "nu": {"type": "semicircle", "sigma": 0.5}}

with tempfile.TemporaryDirectory() as d:
    tmp = pathlib.Path(d)

    r = run(tmp, {"command": "convolve", "model": WIGNER, "output": str(tmp / "conv")})
    expect(r.returncode == 0, "convolve exits 0")
    summary = json.loads((tmp / "conv_summary.json").read_text())
    validate("convolve_summary", summary, "convolve summary")
    expect(abs(summary["moments"][1] - 1.0) < 1e-3, "semicircle second moment is 1 within 1e-3")
    expect(abs(summary["mass"] - 1.0) < 2e-3, "density mass is 1")
    rows = (tmp / "conv_density.csv").read_text().splitlines()
    expect(rows[0] == "x,density", "density CSV header")
    x, dens = map(float, rows[len(rows) // 2].split(","))
    expect(abs(dens - 1.0 / math.pi) < 1e-6 and abs(x) < 1e-12, "density at 0 is 1/pi")
    cells = [c for row in rows[1:] for c in row.split(",")]
    expect(all(len(decimal.Decimal(c).normalize().as_tuple().digits) <= 17 for c in cells),
           "CSV numbers use at most 17 significant digits")

    r = run(tmp, {"command": "convolve", "model": WIGNER, "format": "json", "output": str(tmp / "convj"),
                  "grid": {"lo": -3, "hi": 3, "points": 301}})
    expect(r.returncode == 0, "convolve json exits 0")
    validate("density", json.loads((tmp / "convj_density.json").read_text()), "density json")

    r = run(tmp, {"command": "support", "model": COV, "output": str(tmp / "sup")})
    expect(r.returncode == 0, "support exits 0")
    sup = json.loads((tmp / "sup_support.json").read_text())
    validate("support", sup, "support")
    iv = sup["support"]["intervals"]
    expect(len(iv) == 1 and abs(iv[0]["hi"] - (1 + math.sqrt(0.5)) ** 2) < 1e-9, "MP right edge")
    expect((tmp / "sup_support.csv").read_text().startswith("lo,hi,mass,lo_regular,hi_regular\n"), "support CSV")

    r = run(tmp, {"command": "outliers", "model": COV, "spikes": [3, 1.5], "output": str(tmp / "out")})
    expect(r.returncode == 0, "outliers exits 0")
    rep = json.loads((tmp / "out_outliers.json").read_text())
    validate("outliers", rep, "outlier report")
    s = rep["report"]["spikes"]
    expect(s[0]["classification"] == "outlier" and abs(s[0]["rho"][0] - 3.75) < 1e-12, "sample covariance outlier at 3.75")
    expect(s[1]["classification"] == "stick_right" and abs(s[1]["limit"] - (1 + math.sqrt(0.5)) ** 2) < 1e-9,
           "subcritical spike sticks to the edge")

    r = run(tmp, {"command": "outliers", "model": ISO, "spikes": [10], "output": str(tmp / "iso")})
    expect(r.returncode == 0, "isotropic outliers exits 0")
    rep = json.loads((tmp / "iso_outliers.json").read_text())
    validate("outliers", rep, "isotropic outlier report")
    expect(len(rep["report"]["spikes"][0]["rho"]) == 2, "one spike, two isotropic outliers")

    sim_cfg = {"command": "simulate", "model": WIGNER, "spikes": [{"theta": 2, "multiplicity": 1}],
               "sim": {"n": 120, "trials": 3, "seed": 17}, "threads": 1}
    r1 = run(tmp, dict(sim_cfg, output=str(tmp / "s1")))
    r2 = run(tmp, dict(sim_cfg, output=str(tmp / "s2")), "--threads", "2")
    expect(r1.returncode == 0 and r2.returncode == 0, "simulate exits 0")
    sim = json.loads((tmp / "s1_simulation.json").read_text())
    validate("simulation", sim, "simulation result")
    c1 = (tmp / "s1_eigenvalues.csv").read_text().splitlines()
    c2 = (tmp / "s2_eigenvalues.csv").read_text().splitlines()
    expect(c1[0].startswith("# spec_hash=") and "seed=17" in c1[0], "CSV header embeds hash and seed")
    expect(c1[1:] == c2[1:] and len(c1) == 4, "CSV bodies identical across runs and thread counts")
    r3 = run(tmp, dict(sim_cfg, output=str(tmp / "s3")), "--seed", "18")
    c3 = (tmp / "s3_eigenvalues.csv").read_text().splitlines()
    expect(r3.returncode == 0 and c3[1:] != c1[1:] and "seed=18" in c3[0], "--seed changes the draw")

    cmp_cfg = {"command": "compare", "model": WIGNER, "spikes": [2], "sim": {"n": 300, "trials": 3, "seed": 3},
               "tolerances": {"location": 0.25, "overlap": 0.2, "edge": 0.15, "ks": 0.1, "count_fraction": 0.6}}
    r = run(tmp, dict(cmp_cfg, output=str(tmp / "cmp")))
    verdict = json.loads((tmp / "cmp_verdict.json").read_text())
    validate("verdict", verdict, "verdict")
    expect(r.returncode == 0 and verdict["pass"], "compare passes with loose tolerances")
    strict = dict(cmp_cfg, tolerances={"location": 1e-9}, output=str(tmp / "cmp2"))
    r = run(tmp, strict)
    expect(r.returncode == 3, "failed verdict exits 3")
    expect(not json.loads((tmp / "cmp2_verdict.json").read_text())["pass"], "failed verdict recorded")

    r = run(tmp, {"model": WIGNER, "output": str(tmp / "u")})
    expect(r.returncode == 1, "missing command exits 1")
    validate("error", json.loads(r.stderr.strip().splitlines()[-1]), "usage error on stderr")
    bad = tmp / "bad.json"
    bad.write_text(json.dumps({"command": "convolve", "model": WIGNER, "grid": {"lo": 0, "hi": 1, "points": 10}}))
    r = subprocess.run([str(BIN), "--config", str(bad)], capture_output=True, text=True)
    expect(r.returncode == 1, "grid with fewer than 64 points exits 1")
    validate("error", json.loads(r.stderr.strip()), "grid error on stderr")
    r = subprocess.run([str(BIN), "--bogus"], capture_output=True, text=True)
    expect(r.returncode == 1, "unknown flag exits 1")

    nc = {"command": "convolve", "output": str(tmp / "nc"), "solver": {"max_iter": 2},
          "model": {"kind": "isotropic_additive", "mu": PM_ONE, "nu": PM_ONE},
          "grid": {"lo": -3, "hi": 3, "points": 101}}
    r = run(tmp, nc)
    expect(r.returncode == 2, "solver budget exhaustion exits 2")
    err = json.loads(r.stderr.strip())
    validate("error", err, "NoConvergence error on stderr")
    expect(err["error"]["kind"] == "NoConvergence", "error kind is NoConvergence")

for path in sorted((SCHEMAS.parent / "configs").glob("*.json")):
    validate("run_config", json.loads(path.read_text()), f"shipped config {path.name}")

print(f"{len(failures)} failure(s)")
sys.exit(1 if failures else 0)
