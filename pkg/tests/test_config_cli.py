import copy
import json

import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from algestim import cli, experiments
from algestim.config import EXPERIMENTS, SEED_ENV, ConfigError, load_config, parse_config

# small versions of each experiment, fast enough for the CLI tests
SMALL = {
    "osc-trend": {"n": 4096, "params": {"ladder": [[4096, 8], [4096, 64]]}},
    "mult-reduce": {"n": 16384},
    "window-sweep": {"n": 4096, "trials": 8,
                     "params": {"window_lengths": [0.2, 0.25, 0.3], "band": [0.2, 0.3],
                                "small_window": {"trials": 20}}},
    "centlim": {"params": {"convergent": {"n_bars": [100, 1000], "trials": 20},
                           "divergent": {"trials": 20}}},
    "burst-demod": {"trials": 40},
}

VALID = {
    "osc-trend": {"experiment": "osc-trend", "n": 4096, "seed": 1,
                  "params": {"noise": {"kind": "sinusoid", "terms": [[1.0, 1.0, 0.0]]},
                             "ladder": [[4096, 8], [4096, 64]], "min_decrease_factor": 4}},
    "mult-reduce": {"experiment": "mult-reduce", "n": 4096, "seed": 1,
                    "params": {"x": [1.0, 1.0], "threshold": 0.05,
                               "n1_noise": {"kind": "sinusoid", "terms": [[1.0, 512.0, 0.0]]},
                               "n2_noise": {"kind": "iid", "family": "rademacher", "scale": 1.0}}},
    "window-sweep": {"experiment": "window-sweep", "n": 4096, "trials": 4,
                     "params": {"estimator": {"kind": "annihilating", "degree": 1,
                                              "carrier": {"kind": "sine", "freq": 2.0}},
                                "theta": 1.0, "window_lengths": [0.2, 0.3], "band": [0.1, 0.4],
                                "probe": 0.49, "small_window": {"trials": 5, "steps": 8, "ref": 0.25}}},
    "centlim": {"experiment": "centlim", "trials": 5,
                "params": {"family": "uniform",
                           "convergent": {"n_bars": [10, 100], "t_i": 0.0, "t_f": 1.0,
                                          "slope_range": [-0.7, -0.3]},
                           "divergent": {"n_bars": [4, 8], "growth_factor": 2}}},
    "burst-demod": {"experiment": "burst-demod", "trials": 10,
                    "params": {"carrier": {"kind": "sine", "freq": 2.0}, "window": 0.3,
                               "noise": {"kind": "burst", "poly": [0.1, 0.2],
                                         "base": {"kind": "iid", "family": "gaussian", "scale": 0.5}},
                               "alphabet": [-1, 1], "degree": 2}},
}


def write(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def run_cli(tmp_path, experiment, doc, *extra):
    cfg = write(tmp_path, doc)
    out = tmp_path / "out"
    code = cli.main([experiment, "--config", str(cfg), "--out", str(out), *extra])
    return code, out


@pytest.fixture
def no_compute(monkeypatch):
    """Replace every runner with a recorder so nothing numeric can run."""
    calls = []

    def fake(cfg, jobs=1):
        calls.append(cfg)
        return experiments.Report(cfg.experiment)

    monkeypatch.setattr(experiments, "RUNNERS", {k: fake for k in experiments.RUNNERS})
    return calls


class TestParse:
    @pytest.mark.parametrize("name", EXPERIMENTS)
    def test_defaults_materialized(self, name):
        cfg = parse_config({"experiment": name, "seed": 3})
        doc = cfg.resolved()
        assert doc["experiment"] == name and doc["seed"] == 3
        assert doc["params"]
        # the materialized form parses back to itself
        again = parse_config({k: v for k, v in doc.items()})
        assert again.resolved() == doc

    @pytest.mark.parametrize("name", EXPERIMENTS)
    def test_valid_examples(self, name):
        parse_config(VALID[name])

    @pytest.mark.parametrize("doc,match", [
        ({"experiment": "nope"}, "experiment"),
        ({"experiment": "osc-trend", "n": 1}, "n"),
        ({"experiment": "osc-trend", "n": 10.5}, "integer"),
        ({"experiment": "osc-trend", "seed": -1}, "seed"),
        ({"experiment": "osc-trend", "bogus": 1}, "unknown"),
        ({"experiment": "osc-trend", "params": {"noise": {"kind": "iid", "family": "cauchy"}}}, "family"),
        ({"experiment": "mult-reduce", "params": {"threshold": 0}}, "threshold"),
        ({"experiment": "window-sweep", "params": {"band": [0.5, 0.2]}}, "band"),
        ({"experiment": "window-sweep", "params": {"estimator": {"kind": "annihilating", "degree": 1,
                                                                 "carrier": {"kind": "ramp"}}}}, "not identifiable"),
        ({"experiment": "centlim", "params": {"divergent": {"n_bars": [64, 16]}}}, "divergent"),
        ({"experiment": "burst-demod", "params": {"alphabet": [1, 1]}}, "increasing"),
        ({"experiment": "burst-demod", "params": {"noise": {"kind": "iid"}}}, "burst"),
        ({"experiment": "burst-demod", "params": {"window": 0}}, "window"),
        ({"experiment": "burst-demod", "params": {"noise": {"kind": "burst", "poly": [0] * 10,
                                                            "base": {"kind": "iid"}}}}, "degree"),
    ])
    def test_rejections(self, doc, match):
        with pytest.raises(ConfigError, match=match):
            parse_config(doc)

    def test_cli_experiment_must_match(self):
        with pytest.raises(ConfigError, match="not"):
            parse_config({"experiment": "centlim"}, "osc-trend")

    def test_bad_files(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "missing.json")
        (tmp_path / "bad.json").write_text("{")
        with pytest.raises(ConfigError):
            load_config(tmp_path / "bad.json")


class TestSeed:
    def test_precedence(self, monkeypatch):
        monkeypatch.setenv(SEED_ENV, "77")
        assert parse_config({"experiment": "centlim", "seed": 5}, seed=9).seed == 9
        assert parse_config({"experiment": "centlim", "seed": 5}).seed == 5
        assert parse_config({"experiment": "centlim"}).seed == 77
        monkeypatch.delenv(SEED_ENV)
        assert parse_config({"experiment": "centlim"}).seed == 0

    def test_seed_flows_into_iid_noise(self):
        cfg = parse_config({"experiment": "mult-reduce"}, seed=42)
        assert cfg.params.n2_noise.seed == 42
        pinned = parse_config({"experiment": "mult-reduce",
                               "params": {"n2_noise": {"kind": "iid", "seed": 7}}}, seed=42)
        assert pinned.params.n2_noise.seed == 7

    def test_bad_env(self, monkeypatch):
        monkeypatch.setenv(SEED_ENV, "abc")
        with pytest.raises(ConfigError):
            parse_config({"experiment": "centlim"})

    @pytest.mark.parametrize("seed", [str(2**64), "-1", "abc"])
    def test_cli_rejects_bad_seed(self, tmp_path, seed):
        assert run_cli(tmp_path, "centlim", {}, "--seed", seed)[0] == 3

    def test_cli_accepts_hex_seed(self, monkeypatch, tmp_path, no_compute):
        assert run_cli(tmp_path, "centlim", {}, "--seed", "0xff")[0] == 0
        assert no_compute[-1].seed == 255


# -- fuzzing: invalid documents never reach a runner -----------------------

BAD_SCALARS = st.one_of(
    st.none(), st.booleans(), st.text(max_size=4), st.just(float("nan")), st.just(-1),
    st.just(0), st.just(1e300), st.just(-1e300), st.just([]), st.just({}), st.just([1, "x"]),
)


def paths(doc, prefix=()):
    """Every key path in a JSON document."""
    out = []
    if isinstance(doc, dict):
        for k, v in doc.items():
            out.append(prefix + (k,))
            out += paths(v, prefix + (k,))
    elif isinstance(doc, list):
        for i, v in enumerate(doc):
            out.append(prefix + (i,))
            out += paths(v, prefix + (i,))
    return out


@st.composite
def mutated(draw):
    name = draw(st.sampled_from(EXPERIMENTS))
    doc = copy.deepcopy(VALID[name])
    for _ in range(draw(st.integers(1, 3))):
        ps = paths(doc)
        if not ps:
            break
        path = draw(st.sampled_from(ps))
        node = doc
        for key in path[:-1]:
            node = node[key]
        action = draw(st.sampled_from(["replace", "delete", "extra"]))
        if action == "replace" or not isinstance(node, dict):
            node[path[-1]] = draw(BAD_SCALARS)
        elif action == "delete":
            del node[path[-1]]
        else:
            node["zz_" + draw(st.text("abc", min_size=1, max_size=3))] = 1
    return name, doc


@given(mutated())
@settings(max_examples=300, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
def test_fuzzed_configs_validate_or_reject(no_compute, tmp_path_factory, case):
    name, doc = case
    tmp = tmp_path_factory.mktemp("fuzz")
    before = len(no_compute)
    code, _ = run_cli(tmp, name, doc)
    # no crash: either rejected as configuration, or accepted in full
    assert code in (cli.EXIT_OK, cli.EXIT_CONFIG)
    if code == cli.EXIT_CONFIG:
        assert len(no_compute) == before
    else:
        # an accepted document must be fully materialized and re-parse to the same thing
        cfg = no_compute[-1]
        assert parse_config(cfg.resolved()).resolved() == cfg.resolved()


@given(st.recursive(st.one_of(st.none(), st.booleans(), st.floats(), st.integers(), st.text(max_size=5)),
                    lambda c: st.lists(c, max_size=3) | st.dictionaries(st.text(max_size=6), c, max_size=3),
                    max_leaves=10),
       st.sampled_from(EXPERIMENTS))
@settings(max_examples=200, deadline=None)
def test_garbage_params_only_raise_config_error(params, name):
    try:
        parse_config({"experiment": name, "params": params})
    except ConfigError:
        pass


# -- exit codes and outputs ------------------------------------------------

class TestCli:
    def test_pass_writes_outputs(self, tmp_path, capsys):
        code, out = run_cli(tmp_path, "osc-trend", {"experiment": "osc-trend", **SMALL["osc-trend"]})
        assert code == 0
        assert (out / "osc_trend.csv").read_text().splitlines()[0] == "n,omega,osc_norm"
        resolved = json.loads((out / "config.resolved.json").read_text())
        assert resolved["params"]["min_decrease_factor"] == 4.0
        assert "PASS row1_decrease" in capsys.readouterr().out

    def test_constant_noise_fails_with_row(self, tmp_path, capsys):
        doc = {"experiment": "osc-trend", **SMALL["osc-trend"]}
        doc["params"] = dict(doc["params"], noise={"kind": "constant", "value": 1.0})
        code, out = run_cli(tmp_path, "osc-trend", doc)
        assert code == 2
        assert "row1_decrease" in capsys.readouterr().err
        assert (out / "osc_trend_summary.csv").exists()

    def test_zero_noise_passes(self, tmp_path):
        doc = {"experiment": "osc-trend", **SMALL["osc-trend"]}
        doc["params"] = dict(doc["params"], noise={"kind": "constant", "value": 0.0})
        code, out = run_cli(tmp_path, "osc-trend", doc)
        assert code == 0
        rows = (out / "osc_trend.csv").read_text().splitlines()[1:]
        assert all(r.endswith(",0") for r in rows)

    def test_mult_reduce_constant_factor_fails(self, tmp_path):
        doc = {"experiment": "mult-reduce", "n": 16384,
               "params": {"n1_noise": {"kind": "constant", "value": 0.5}}}
        assert run_cli(tmp_path, "mult-reduce", doc)[0] == 2

    def test_mult_reduce_identity_channel(self, tmp_path):
        doc = {"experiment": "mult-reduce", "n": 4096,
               "params": {"n1_noise": {"kind": "constant", "value": 0.0},
                          "n2_noise": {"kind": "constant", "value": 0.0}}}
        code, out = run_cli(tmp_path, "mult-reduce", doc)
        assert code == 0
        assert (out / "mult_reduce.csv").read_text() == "n,osc_norm,threshold,pass\n4096,0,0.050000000000000003,1\n"

    def test_config_error_exit(self, tmp_path, capsys):
        code, out = run_cli(tmp_path, "centlim", {"experiment": "centlim", "n": -3})
        assert code == 3
        assert not out.exists()
        assert "configuration error" in capsys.readouterr().err

    def test_scenario_error_exit(self, tmp_path):
        doc = {"experiment": "burst-demod", "trials": 20, "params": {"window": 0.5}}
        assert run_cli(tmp_path, "burst-demod", doc)[0] == 3

    def test_internal_error_exit(self, tmp_path, monkeypatch):
        def boom(cfg, jobs=1):
            raise RuntimeError("kaput")

        monkeypatch.setitem(experiments.RUNNERS, "centlim", boom)
        assert run_cli(tmp_path, "centlim", {"experiment": "centlim"})[0] == 1

    def test_bad_jobs(self, tmp_path):
        assert run_cli(tmp_path, "centlim", {"experiment": "centlim"}, "--jobs", "0")[0] == 3

    def test_output_from_config(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        doc = {"experiment": "osc-trend", "output": "here", **SMALL["osc-trend"]}
        write(tmp_path, doc)
        assert cli.main(["osc-trend", "--config", str(tmp_path / "cfg.json")]) == 0
        assert (tmp_path / "here" / "osc_trend.csv").exists()

    @pytest.mark.parametrize("name", ["window-sweep", "burst-demod"])
    def test_byte_identical(self, tmp_path, name):
        doc = {"experiment": name, "seed": 11, **SMALL[name]}
        cfg = write(tmp_path, doc)
        outs = []
        for jobs in ("1", "4", "1"):
            out = tmp_path / f"out{len(outs)}"
            cli.main([name, "--config", str(cfg), "--out", str(out), "--jobs", jobs])
            outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        assert outs[0] == outs[1] == outs[2]
        for blob in outs[0].values():
            assert b"\r" not in blob

    def test_seed_changes_output(self, tmp_path):
        doc = {"experiment": "burst-demod", **SMALL["burst-demod"]}
        cfg = write(tmp_path, doc)
        blobs = []
        for seed in ("1", "2"):
            out = tmp_path / seed
            cli.main(["burst-demod", "--config", str(cfg), "--out", str(out), "--seed", seed])
            blobs.append((out / "burst_demod_plain_trials.csv").read_bytes())
            assert json.loads((out / "config.resolved.json").read_text())["seed"] == int(seed)
        assert blobs[0] != blobs[1]


class TestMultiplicativeCap:
    def test_default_cap(self):
        assert parse_config({"experiment": "mult-reduce"}).params.n1_max_amplitude == 10.0

    def test_rejects_large_factor(self):
        doc = {"experiment": "mult-reduce",
               "params": {"n1_noise": {"kind": "sinusoid", "terms": [[8.0, 512, 0], [3.0, 1024, 0]]}}}
        with pytest.raises(ConfigError, match="n1_max_amplitude"):
            parse_config(doc)
        doc["params"]["n1_max_amplitude"] = 11
        parse_config(doc)

    def test_gaussian_factor_counts_its_tail(self):
        doc = {"experiment": "mult-reduce",
               "params": {"n1_noise": {"kind": "iid", "family": "gaussian", "scale": 1.5}}}
        with pytest.raises(ConfigError):
            parse_config(doc)
