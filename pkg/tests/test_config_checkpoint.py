"""Tests for YAML config loading and checkpoint persistence."""

import json
import os

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from causalgen.checkpoint import (
    CHECKPOINT_VERSION,
    HISTORY_NAME,
    MANIFEST_NAME,
    PAYLOAD_NAME,
    history_csv_bytes,
    load_checkpoint,
    load_history_csv,
    read_manifest,
    save_checkpoint,
)
from causalgen.config import (
    Config,
    ENV_OUT,
    ENV_SEED,
    apply_env_overrides,
    load_config,
)
from causalgen.errors import VersionMismatch
from causalgen.paths import PathSet, normalize_to_ball
from causalgen.simulate import BSParams
from causalgen.vae import (
    ConditionSpec,
    ConditionalTCVAE,
    LossReport,
    TCVAE,
    TrainConfig,
    generate,
    train,
)


class TestConfig:
    def test_empty_file_gives_defaults(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text("")
        cfg = load_config(p, env={})
        assert cfg.model.n_steps == 61
        assert cfg.train.lr == 1e-3
        assert cfg.eval.metrics == ("swd", "mmd", "sigmmd", "saw")
        assert cfg.output_dir == "out"

    def test_sections_parse(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text(
            "model: {n_steps: 13, beta: 0.25}\n"
            "train: {lr: 0.01, epochs: 7, batch: 16, seed: 3}\n"
            "data: {normalization: divide-by-start, window: 13}\n"
            "eval: {metrics: 'swd,saw', saw_len: 4}\n"
            "simulate: {model: heston, n: 50, params: {kappa: 2.0}}\n"
            "output_dir: results\n")
        cfg = load_config(p, env={})
        assert cfg.model.n_steps == 13
        assert cfg.train.epochs == 7
        assert cfg.eval.metrics == ("swd", "saw")
        assert cfg.simulate.build_params().kappa == 2.0
        assert cfg.output_dir == "results"

    def test_unknown_keys_rejected(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text("model: {banana: 1}\n")
        with pytest.raises(ValueError, match="banana"):
            load_config(p, env={})
        p.write_text("mdoel: {}\n")
        with pytest.raises(ValueError, match="mdoel"):
            load_config(p, env={})

    def test_range_checks(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text("train: {lr: -1.0}\n")
        with pytest.raises(ValueError, match="lr"):
            load_config(p, env={})
        p.write_text("model: {beta: -0.5}\n")
        with pytest.raises(ValueError, match="beta"):
            load_config(p, env={})
        p.write_text("simulate: {model: ou}\n")
        with pytest.raises(ValueError, match="simulator"):
            load_config(p, env={})
        p.write_text("simulate: {params: {sigma: -2.0}}\n")
        with pytest.raises(ValueError, match="sigma"):
            load_config(p, env={})
        p.write_text("eval: {metrics: 'swd,magic'}\n")
        with pytest.raises(ValueError, match="magic"):
            load_config(p, env={})

    def test_env_overrides(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text("train: {seed: 1}\nsimulate: {seed: 2}\n")
        cfg = load_config(p, env={ENV_SEED: "99", ENV_OUT: "elsewhere"})
        assert cfg.train.seed == 99
        assert cfg.simulate.seed == 99
        assert cfg.eval.seed == 99
        assert cfg.output_dir == "elsewhere"
        with pytest.raises(ValueError, match="integer"):
            apply_env_overrides(Config(), env={ENV_SEED: "abc"})

    def test_file_existence_check(self, tmp_path):
        cfg = Config.from_dict({"data": {"source": str(tmp_path / "nope.csv")}})
        cfg.validate(check_files=False)
        with pytest.raises(FileNotFoundError):
            cfg.validate(check_files=True)
        cfg2 = Config.from_dict({})
        with pytest.raises(ValueError, match="required"):
            cfg2.validate(check_files=True)

    def test_round_trip_dict(self):
        cfg = Config.from_dict({"model": {"d_z": 2}, "eval": {"metrics": ["swd"]}})
        again = Config.from_dict(cfg.to_dict())
        assert again == cfg


def perturb(m, rng):
    for _, p in m.named_params():
        p.value += 0.1 * rng.normal(size=p.value.shape)
    return m


def models_equal(a, b):
    pa, pb = a.named_params(), b.named_params()
    return (
        [n for n, _ in pa] == [n for n, _ in pb]
        and all(np.array_equal(x.value, y.value) for (_, x), (_, y) in zip(pa, pb)))


class TestCheckpoint:
    def test_round_trip_plain(self, tmp_path):
        m = perturb(TCVAE(d=1, d_z=1, n_steps=5, hidden=8, flow_layers=2,
                          flow_hidden=16, seed=0), np.random.default_rng(0))
        m.dt = 0.25
        save_checkpoint(m, tmp_path / "ck")
        m2 = load_checkpoint(tmp_path / "ck")
        assert models_equal(m, m2)
        assert m2.dt == 0.25
        assert m2.norm is None

    def test_round_trip_conditional_with_norm(self, tmp_path):
        spec = ConditionSpec(truncation=7, alpha=1.2, delta=0.8)
        m = perturb(ConditionalTCVAE(d=1, d_z=1, n_steps=4, d_c=1, embed_dim=6,
                                     hidden=8, flow_layers=2, flow_hidden=16,
                                     seed=1, cond_spec=spec),
                    np.random.default_rng(1))
        data = normalize_to_ball(PathSet(
            np.random.default_rng(2).normal(size=(6, 4, 1)) + 5.0, dt=0.5))
        m.norm = data.normalization
        m.dt = data.dt
        save_checkpoint(m, tmp_path / "ck")
        m2 = load_checkpoint(tmp_path / "ck")
        assert isinstance(m2, ConditionalTCVAE)
        assert models_equal(m, m2)
        assert m2.cond_spec == spec
        assert m2.norm.scheme == data.normalization.scheme
        np.testing.assert_array_equal(m2.norm.shift, data.normalization.shift)
        assert m2.norm.scale == data.normalization.scale

    def test_generation_identical_after_reload(self, tmp_path):
        data = normalize_to_ball(PathSet(
            1.0 + 0.1 * np.random.default_rng(3).normal(size=(16, 4, 1)), dt=1.0))
        m, history = train(
            TCVAE(d=1, d_z=1, n_steps=4, hidden=8, flow_layers=2,
                  flow_hidden=16, seed=0),
            data, TrainConfig(epochs=2, batch_size=8, seed=0))
        save_checkpoint(m, tmp_path / "ck", history=history)
        m2 = load_checkpoint(tmp_path / "ck")
        np.testing.assert_array_equal(
            generate(m, 5, seed=7).values, generate(m2, 5, seed=7).values)

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.integers(1, 4), st.integers(1, 2),
           st.booleans())
    def test_round_trip_random_models(self, seed, n_steps, d, conditional):
        import tempfile
        kw = dict(d=d, d_z=1, n_steps=n_steps, hidden=4, flow_layers=1,
                  flow_hidden=4, seed=seed % 1000)
        if conditional:
            m = ConditionalTCVAE(d_c=1, embed_dim=3, **kw)
        else:
            m = TCVAE(**kw)
        perturb(m, np.random.default_rng(seed))
        with tempfile.TemporaryDirectory() as tmp:
            save_checkpoint(m, os.path.join(tmp, "ck"))
            m2 = load_checkpoint(os.path.join(tmp, "ck"))
        assert models_equal(m, m2)

    def test_version_mismatch(self, tmp_path):
        m = TCVAE(d=1, d_z=1, n_steps=3, hidden=4, flow_layers=1, flow_hidden=4)
        save_checkpoint(m, tmp_path / "ck")
        mf = read_manifest(tmp_path / "ck")
        mf["version"] = "causalgen-checkpoint-0"
        with open(tmp_path / "ck" / MANIFEST_NAME, "w") as fh:
            json.dump(mf, fh)
        with pytest.raises(VersionMismatch, match="version"):
            load_checkpoint(tmp_path / "ck")

    def test_truncated_payload_detected(self, tmp_path):
        m = TCVAE(d=1, d_z=1, n_steps=3, hidden=4, flow_layers=1, flow_hidden=4)
        save_checkpoint(m, tmp_path / "ck")
        payload = tmp_path / "ck" / PAYLOAD_NAME
        payload.write_bytes(payload.read_bytes()[:-16])
        with pytest.raises(VersionMismatch, match="payload"):
            load_checkpoint(tmp_path / "ck")

    def test_manifest_is_inspectable(self, tmp_path):
        m = TCVAE(d=1, d_z=1, n_steps=3, hidden=4, flow_layers=1, flow_hidden=4)
        save_checkpoint(m, tmp_path / "ck", config_echo={"note": "smoke"})
        mf = read_manifest(tmp_path / "ck")
        assert mf["version"] == CHECKPOINT_VERSION
        assert mf["model"]["class"] == "TCVAE"
        assert mf["config"] == {"note": "smoke"}
        total = sum(int(np.prod(e["shape"])) for e in mf["params"])
        assert (tmp_path / "ck" / PAYLOAD_NAME).stat().st_size == 8 * total


class TestHistoryCSV:
    def test_format_and_round_trip(self, tmp_path):
        history = [
            LossReport(rec=1.5, latent=2.0, beta=0.0, total=1.5,
                       cw1_upper_bound=None),
            LossReport(rec=1.25, latent=1.5, beta=0.5, total=2.0,
                       cw1_upper_bound=9.0),
        ]
        blob = history_csv_bytes(history)
        first = blob.decode().splitlines()[0]
        assert first == "epoch,rec,latent,total,cw1_upper_bound"
        path = tmp_path / HISTORY_NAME
        path.write_bytes(blob)
        back = load_history_csv(path)
        assert len(back) == 2
        assert back[0].rec == 1.5 and back[0].cw1_upper_bound is None
        assert back[1].total == 2.0 and back[1].beta == 0.5
        assert back[1].cw1_upper_bound == 9.0

    def test_digest_matches_file(self, tmp_path):
        import hashlib
        data = PathSet(1.0 + 0.1 * np.random.default_rng(0).normal(
            size=(8, 3, 1)), dt=1.0)
        m, history = train(
            TCVAE(d=1, d_z=1, n_steps=3, hidden=4, flow_layers=1, flow_hidden=4),
            data, TrainConfig(epochs=2, batch_size=4, seed=0))
        save_checkpoint(m, tmp_path / "ck", history=history)
        mf = read_manifest(tmp_path / "ck")
        blob = (tmp_path / "ck" / HISTORY_NAME).read_bytes()
        assert mf["history_digest"] == hashlib.sha256(blob).hexdigest()
