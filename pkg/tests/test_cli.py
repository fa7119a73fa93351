"""Experiment runner: config parsing, persistence, determinism, thresholds."""

import csv
import itertools
import json
import math

import numpy as np
import pytest

from cohsurf.channel import ErrorChannelParams
from cohsurf.cli import (
    ConfigError,
    RunConfig,
    crossing_estimate,
    main,
    point_seed,
    run,
    threshold_scan,
)
from cohsurf.lattice import build_layout, syndrome_key
from cohsurf.oracle import exact_z_table

CONFIG_TEMPLATE = """
[grid]
d = [3]
p = [0.1]
gamma = [0.9]

[run]
n_samples = 60
chi_max = 32
master_seed = 42
mode = "{mode}"
output_dir = "{out}"
"""


def write_config(tmp_path, mode="sampled", **extra):
    out = tmp_path / "out"
    text = CONFIG_TEMPLATE.format(mode=mode, out=out)
    for k, v in extra.items():
        text += f"{k} = {v}\n"
    path = tmp_path / "config.toml"
    path.write_text(text)
    return path, out


def read_rows(out):
    with open(out / "metrics.csv") as fh:
        return list(csv.DictReader(fh))


class TestConfig:
    def test_toml_roundtrip(self, tmp_path):
        path, out = write_config(tmp_path)
        config = RunConfig.from_toml(path)
        assert config.d_values == (3,)
        assert config.mode == "sampled"
        assert config.n_samples == 60

    @pytest.mark.parametrize(
        "bad",
        [
            "[grid]\nd = [4]\np = [0.1]\ngamma = [0.5]\n",
            "[grid]\nd = [3]\np = [1.5]\ngamma = [0.5]\n",
            "[grid]\nd = [3]\np = [0.1]\ngamma = [2.0]\n",
            "[grid]\nd = [5]\np = [0.1]\ngamma = [0.5]\n[run]\nmode = \"exhaustive\"\n",
            "[grid]\nd = [3]\np = [0.1]\ngamma = [0.5]\n[run]\nbogus = 1\n",
        ],
    )
    def test_invalid_configs(self, tmp_path, bad):
        path = tmp_path / "bad.toml"
        path.write_text(bad)
        with pytest.raises(ConfigError):
            RunConfig.from_toml(path)

    def test_cli_exit_code_for_config_error(self, tmp_path, capsys):
        path = tmp_path / "bad.toml"
        path.write_text("[grid]\nd = [4]\np = [0.1]\ngamma = [0.5]\n")
        assert main(["run", str(path)]) == 2
        assert "configuration error" in capsys.readouterr().err

    def test_point_seeds_distinct(self):
        seeds = {
            point_seed(1, d, p, g).entropy
            for d in (3, 5)
            for p in (0.1, 0.2)
            for g in (0.0, 0.5)
        }
        assert len(seeds) == 8


class TestRun:
    def test_exhaustive_matches_oracle(self, tmp_path):
        path, out = write_config(tmp_path, mode="exhaustive")
        assert main(["run", str(path)]) == 0
        (row,) = read_rows(out)
        layout = build_layout(3, 3)
        table = exact_z_table(layout, ErrorChannelParams.uniform(0.1, 0.9, 9))
        exact_pl = sum(
            min(table[(syndrome_key(s), 0, 0)].real, table[(syndrome_key(s), 1, 1)].real)
            for s in (
                frozenset(i for i, b in enumerate(bits) if b)
                for bits in itertools.product([0, 1], repeat=4)
            )
        )
        assert float(row["p_logical"]) == pytest.approx(exact_pl, abs=1e-10)
        assert float(row["p_logical_sem"]) == 0.0
        assert row["mode"] == "exhaustive"

    def test_sampled_agrees_with_exhaustive(self, tmp_path):
        path_s, out_s = write_config(tmp_path)
        assert main(["run", str(path_s)]) == 0
        (row_s,) = read_rows(out_s)

        tmp2 = tmp_path / "ex"
        tmp2.mkdir()
        path_e, out_e = write_config(tmp2, mode="exhaustive")
        assert main(["run", str(path_e)]) == 0
        (row_e,) = read_rows(out_e)

        for metric in ("p_logical", "coherent_information", "logical_coherence"):
            sem = float(row_s[f"{metric}_sem"])
            assert abs(float(row_s[metric]) - float(row_e[metric])) < 4 * sem + 1e-12

    def test_byte_identical_reruns(self, tmp_path):
        path, out = write_config(tmp_path)
        assert main(["run", str(path)]) == 0
        first = (out / "metrics.csv").read_bytes()
        other = tmp_path / "other"
        config = RunConfig.from_toml(path)
        config2 = RunConfig(**{**config.__dict__, "output_dir": str(other)})
        assert run(config2) == 0
        assert (other / "metrics.csv").read_bytes() == first

    def test_crash_resume_recomputes_only_missing(self, tmp_path):
        out = tmp_path / "out"
        config = RunConfig(
            d_values=(3,),
            p_values=(0.05, 0.1),
            gamma_values=(0.5,),
            n_samples=30,
            chi_max=16,
            master_seed=7,
            output_dir=str(out),
        )
        assert run(config) == 0
        first = (out / "metrics.csv").read_bytes()
        stored = json.loads((out / "rows.json").read_text())
        dropped = sorted(stored["rows"])[0]
        del stored["rows"][dropped]
        (out / "rows.json").write_text(json.dumps(stored))
        assert run(config) == 0
        assert (out / "metrics.csv").read_bytes() == first
        manifest = json.loads((out / "manifest.json").read_text())
        assert list(manifest["points"]) == [dropped]

    def test_keep_samples_stream(self, tmp_path):
        out = tmp_path / "out"
        config = RunConfig(
            d_values=(3,),
            p_values=(0.1,),
            gamma_values=(0.9,),
            n_samples=12,
            chi_max=16,
            master_seed=3,
            keep_samples=True,
            output_dir=str(out),
        )
        assert run(config) == 0
        (stream,) = list((out / "samples").glob("*.jsonl"))
        lines = stream.read_text().strip().split("\n")
        assert len(lines) == 12
        assert all("syndrome" in json.loads(l) for l in lines)

    def test_manifest_contents(self, tmp_path):
        path, out = write_config(tmp_path)
        assert main(["run", str(path)]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config_hash"] == RunConfig.from_toml(path).config_hash()
        assert manifest["failures"] == []
        assert all(v["status"] == "done" for v in manifest["points"].values())

    def test_partial_and_total_failure_exit_codes(self, tmp_path, monkeypatch):
        import cohsurf.cli as cli_mod

        failures = {"always": lambda d, p: True, "one": lambda d, p: p == 0.05}

        def make_task(pred):
            def fake(args):
                config_dict, d, p, gamma = args
                key = cli_mod._point_key(d, p, gamma, "sampled")
                if pred(d, p):
                    return {"key": key, "row": None, "samples": None,
                            "error": "SamplingFault: synthetic"}
                row = {c: 0.0 for c in cli_mod.CSV_COLUMNS}
                row.update(schema=cli_mod.CSV_SCHEMA_VERSION, d=d, p=p, gamma=gamma,
                           mode="sampled")
                return {"key": key, "row": row, "samples": None, "error": None}

            return fake

        config = RunConfig(
            d_values=(3,), p_values=(0.05, 0.1), gamma_values=(0.5,),
            output_dir=str(tmp_path / "fail"),
        )
        monkeypatch.setattr(cli_mod, "_run_point_task", make_task(failures["one"]))
        assert run(config) == 4  # partial failure
        manifest = json.loads((tmp_path / "fail" / "manifest.json").read_text())
        assert len(manifest["failures"]) == 1

        config2 = RunConfig(
            d_values=(3,), p_values=(0.05, 0.1), gamma_values=(0.5,),
            output_dir=str(tmp_path / "fail2"),
        )
        monkeypatch.setattr(cli_mod, "_run_point_task", make_task(failures["always"]))
        assert run(config2) == 3  # every point failed


class TestThreshold:
    def synthetic_rows(self, p_star=0.11, seed=0):
        rng = np.random.default_rng(seed)
        rows = []
        for d in (5, 7, 9):
            for p in np.linspace(0.08, 0.14, 7):
                # curves of increasing slope through a common crossing point
                y = 0.3 + d * (p - p_star) + rng.normal(0, 1e-4)
                rows.append(
                    {"d": d, "p": p, "p_logical": y, "p_logical_sem": 1e-4}
                )
        return rows

    def test_synthetic_crossing_recovered(self):
        rows = self.synthetic_rows(p_star=0.11)
        result = threshold_scan(rows, "p_logical", n_bootstrap=100, seed=1)
        assert result["crossing"] == pytest.approx(0.11, abs=2e-3)
        assert result["ci_low"] <= 0.11 <= result["ci_high"]

    def test_no_crossing_is_explicit(self):
        rows = []
        for d in (5, 7):
            for p in (0.08, 0.1, 0.12):
                rows.append(
                    {"d": d, "p": p, "p_logical": 0.1 + 0.01 * d + p, "p_logical_sem": 1e-5}
                )
        result = threshold_scan(rows, "p_logical", n_bootstrap=10)
        assert result["crossing"] is None

    def test_needs_two_distances(self):
        rows = [{"d": 3, "p": 0.1, "p_logical": 0.2, "p_logical_sem": 0.01}]
        with pytest.raises(ConfigError):
            threshold_scan(rows, "p_logical")

    def test_pairwise_interpolation(self):
        curves = {
            3: (np.array([0.0, 1.0]), np.array([0.0, 1.0])),
            5: (np.array([0.0, 1.0]), np.array([0.5, 0.5])),
        }
        assert crossing_estimate(curves) == [0.5]


class TestSampleDump:
    def test_stdout_jsonl(self, capsys):
        assert main(
            ["sample-dump", "--d", "3", "--p", "0.1", "--gamma", "0.8", "--n", "4",
             "--seed", "5", "--no-entropies"]
        ) == 0
        lines = capsys.readouterr().out.strip().split("\n")
        assert len(lines) == 4
        doc = json.loads(lines[0])
        assert len(doc["eta"]) == 9
