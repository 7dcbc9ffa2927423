#!/usr/bin/env python3
"""Smoke test for the mpspectra_py extension module.

Builds the cdylib with cargo, copies it next to a temporary import path as
``mpspectra_py.so`` and exercises the main types. With ``--cli`` it also runs
the ``mpspectra`` binary on the shipped configs and validates every JSON
output against the schemas in ``schemas/`` (needs the ``jsonschema`` package).

    python3 python/smoke_test.py [--release] [--cli]
"""

import argparse
import cmath
import importlib
import json
import math
import pathlib
import shutil
import subprocess
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def build(release: bool) -> pathlib.Path:
    profile = ["--release"] if release else []
    subprocess.run(
        ["cargo", "build", "--offline", "-p", "mpspectra-python", *profile],
        cwd=ROOT,
        check=True,
    )
    lib = ROOT / "target" / ("release" if release else "debug") / "libmpspectra_py.so"
    if not lib.exists():
        sys.exit(f"built library not found at {lib}")
    return lib


def load(lib: pathlib.Path, where: pathlib.Path):
    shutil.copy(lib, where / "mpspectra_py.so")
    sys.path.insert(0, str(where))
    return importlib.import_module("mpspectra_py")


def check_law(mp):
    golden = (math.sqrt(5) - 1) / 2
    s_norm = mp.MpLaw(1.0).stieltjes_real(-1.0)
    assert abs(s_norm.real - golden) < 1e-10, s_norm
    assert mp.mp_support(0.25) == (0.25, 2.25)
    assert mp.mp_atom(2.0) == 0.5
    for c in (0.1, 0.5, 1.0, 2.0, 10.0):
        law = mp.MpLaw(c)
        assert abs(law.atom + law.continuous_mass() - 1) < 1e-8
        z = complex(1.0, 0.5)
        s, big_s = mp.mp_stieltjes(z, c)
        assert abs(big_s - c * s) < 1e-12
        residual = z * big_s**2 + (z - 1 + c) * big_s + c
        assert abs(residual) < 1e-10, residual
        assert s.imag > 0
    law = mp.MpLaw(0.5)
    assert abs(law.cdf(law.quantile(0.3)) - 0.3) < 1e-9


def check_spectra(mp):
    model = mp.ColumnModel("iid_gaussian", 200)
    assert model.has_iid_entries
    spectrum = model.sample_spectrum(400, seed=1)
    assert len(spectrum) == 200 and spectrum.n == 400
    law = mp.MpLaw(spectrum.ratio)
    ks = spectrum.ks_distance(law)
    assert 0 <= ks < 0.1, ks
    z = complex(1.0, 1.0)
    err = abs(spectrum.empirical_stieltjes(z) - law.stieltjes(z))
    assert err < 0.05, err

    rows = model.sample_matrix(10, seed=3)
    assert len(rows) == 200 and len(rows[0]) == 10
    again = mp.ColumnModel.from_json(model.to_json()).sample_matrix(10, seed=3)
    assert rows == again

    x = [[1.0, 1.0, 1.0, 1.0, 1.0], [1.0, -1.0, 0.0, 0.0, 0.0], [0.0] * 5]
    assert [round(v, 12) for v in mp.esd(x).eigenvalues] == [0.0, 0.4, 1.0]

    mixture = mp.ColumnModel("scalar_mixture", 200, base="iid_gaussian")
    assert not mixture.has_iid_entries
    assert mixture.sample_spectrum(400, seed=1).ks_distance(law) > 0.1
    sphere = mp.ColumnModel("sphere_uniform", 50).sample_column(seed=9)
    assert abs(sum(v * v for v in sphere) - 50) < 1e-9


def check_resolvent(mp):
    c = [[2.0, 0.5, 0.0], [0.5, 1.0, 0.2], [0.0, 0.2, 0.5]]
    x = [1.0, -1.0, 0.5]
    z = complex(0.7, 0.1)
    reports = mp.check_lemma1(c, x, z)
    assert [r["name"] for r in reports] == ["L1.1", "L1.2", "L1.3", "L1.4", "L1.5"]
    assert all(r["pass"] for r in reports), reports
    assert mp.sherman_morrison_gap(c, x, z) < 1e-10
    cols = [[1.0, 0.0], [0.0, 2.0], [1.0, 1.0], [0.5, -0.5]]
    assert mp.trace_identity_residual(cols, z, 3) < 1e-10


def check_conditions(mp):
    gauss = mp.ColumnModel("iid_gaussian", 400)
    dev = mp.quadform_deviation(gauss, trials=400, seed=2)
    assert abs(dev["mean"] - 2 / 400) < 5 * dev["std_error"] + 1e-4, dev
    spike = mp.ColumnModel("iid_sparse_spike", 100)
    assert mp.lindeberg_statistic(spike, trials=50, seed=1)["exact"] == 1.0
    report = mp.condition_sweep('{"kind":"iid_gaussian"}', [50, 100, 200], "quad_form_deviation", 300, 4)
    assert report["verdict"] == "consistent_with_a", report
    report = mp.condition_sweep(
        '{"kind":"scalar_mixture","base":{"kind":"iid_gaussian"}}', [50, 100, 200], "quad_form_deviation", 300, 4
    )
    assert report["verdict"] == "violates_a", report


def check_errors(mp):
    expectations = [
        (lambda: mp.MpLaw(-1.0), mp.DomainError),
        (lambda: mp.MpLaw(1.0).stieltjes(complex(1.0, 0.0)), mp.DomainError),
        (lambda: mp.ColumnModel("iid_cauchy", 10), mp.ConfigError),
        (lambda: mp.ColumnModel("linear_filter", 10, coefficients=[0.0, 0.0]), mp.ConfigError),
        (lambda: mp.esd([[1.0, 2.0], [3.0]]), mp.DomainError),
        (lambda: mp.condition_sweep('{"kind":"iid_gaussian"}', [10], "nonsense", 10, 1), mp.ConfigError),
    ]
    for call, exc in expectations:
        try:
            call()
        except exc:
            continue
        raise AssertionError(f"expected {exc.__name__}")
    assert issubclass(mp.ConfigError, ValueError)


def check_cli(release: bool, out: pathlib.Path):
    import jsonschema
    from referencing import Registry, Resource

    profile = ["--release"] if release else []
    subprocess.run(["cargo", "build", "--offline", "-p", "mpspectra-cli", *profile], cwd=ROOT, check=True)
    binary = ROOT / "target" / ("release" if release else "debug") / "mpspectra"
    schemas = {p.name: json.loads(p.read_text()) for p in (ROOT / "schemas").glob("*.schema.json")}
    registry = Registry().with_resources((s["$id"], Resource.from_contents(s)) for s in schemas.values())

    def validate(doc, name):
        jsonschema.Draft202012Validator(schemas[name], registry=registry).validate(doc)

    outputs = {
        "esd": ("summary.json", "summary.schema.json"),
        "stieltjes": ("stieltjes_summary.json", "stieltjes_summary.schema.json"),
        "check-lemma": ("lemma1.json", "lemma1.schema.json"),
        "check-conditions": ("conditions.json", "conditions.schema.json"),
    }
    for config in sorted((ROOT / "configs").glob("*.json")):
        validate(json.loads(config.read_text()), "config.schema.json")
        command = next(c for c in outputs if config.stem.startswith(c.replace("-", "_")))
        target = out / config.stem
        subprocess.run([str(binary), command, "--config", str(config), "--out", str(target)], check=True)
        produced, schema = outputs[command]
        validate(json.loads((target / produced).read_text()), schema)
        print(f"  {config.name}: {command} output matches {schema}")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--release", action="store_true", help="build with the release profile")
    parser.add_argument("--cli", action="store_true", help="also run the CLI and validate its JSON")
    args = parser.parse_args()

    lib = build(args.release)
    with tempfile.TemporaryDirectory() as tmp:
        mp = load(lib, pathlib.Path(tmp))
        for check in (check_law, check_spectra, check_resolvent, check_conditions, check_errors):
            check(mp)
            print(f"ok {check.__name__}")
        if args.cli:
            check_cli(args.release, pathlib.Path(tmp))
            print("ok check_cli")
    print("smoke test passed")


if __name__ == "__main__":
    main()
