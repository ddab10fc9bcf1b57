import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from remixkit.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from remixkit.config import SnrcmConfig, TrainConfig, load_config, parse_config_text
from remixkit.errors import DataError
from remixkit.model import ArchConfig, init_params


class TestSnrcmParse:
    @pytest.mark.parametrize("text,expected", [
        ("off", SnrcmConfig()),
        ("uniform:-10:30", SnrcmConfig("uniform", -10.0, 30.0)),
        ("uniform:0:20", SnrcmConfig("uniform", 0.0, 20.0)),
        ("curriculum:cl-vad", SnrcmConfig("curriculum", preset="cl-vad")),
    ])
    def test_valid(self, text, expected):
        assert SnrcmConfig.parse(text) == expected

    @pytest.mark.parametrize("text", ["", "uniform:a:b", "uniform:1", "curriculum", "gauss:0:1", "off:1"])
    def test_invalid(self, text):
        with pytest.raises(ValueError):
            SnrcmConfig.parse(text)

    def test_schedules(self):
        assert SnrcmConfig().schedule(10) is None
        assert SnrcmConfig.parse("uniform:-20:40").schedule(3).dist_for_epoch(2).hi == 40
        assert SnrcmConfig.parse("curriculum:cl-novad").schedule(8).total_epochs == 8

    def test_custom_stages(self):
        cfg = SnrcmConfig("curriculum", stages=((0.0, 10.0), (-5.0, 20.0)))
        sched = cfg.schedule(6)
        assert [(s.start, s.end) for s in sched.stages] == [(0, 3), (3, 6)]
        with pytest.raises(ValueError):
            cfg.schedule(5)

    def test_uniform_needs_bounds(self):
        with pytest.raises(ValueError):
            SnrcmConfig("uniform").schedule(4)


class TestTrainConfig:
    def test_defaults(self):
        cfg = TrainConfig()
        assert (cfg.gamma, cfg.batch_size, cfg.epochs, cfg.checkpoint_every) == (0.01, 24, 200, 10)

    @pytest.mark.parametrize("kw", [dict(method="sgd"), dict(gamma=1.5), dict(epochs=0),
                                    dict(learning_rate=-1.0),
                                    dict(epochs=10, snrcm=SnrcmConfig.parse("curriculum:cl-novad"))])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            TrainConfig(**kw)

    def test_text_round_trip(self, tmp_path):
        cfg = TrainConfig(method="re2re", gamma=0.5, epochs=8, batch_size=6, seed=3,
                          snrcm=SnrcmConfig.parse("curriculum:cl-vad"), arch=ArchConfig(8, 17, 4),
                          init="identity", identity_permutations=True)
        (tmp_path / "run.cfg").write_text(cfg.to_text())
        assert load_config(tmp_path / "run.cfg") == cfg

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0, 1), st.integers(2, 64), st.integers(1, 50), st.floats(0, 1), st.integers(0, 2**31))
    def test_mapping_round_trip(self, gamma, b, epochs, lr, seed):
        cfg = TrainConfig(gamma=gamma, batch_size=b, epochs=epochs, learning_rate=lr, seed=seed,
                          snrcm=SnrcmConfig.parse("uniform:-10:30"))
        assert TrainConfig.from_mapping(parse_config_text(cfg.to_text())) == cfg

    def test_grammar(self):
        items = parse_config_text("# header\n\nmethod = re2re  # inline\n snrcm.kind=uniform\nx = a=b\n")
        assert items == {"method": "re2re", "snrcm.kind": "uniform", "x": "a=b"}

    def test_missing_equals(self):
        with pytest.raises(ValueError, match="line 2"):
            parse_config_text("method = remixit\ngamma 0.1\n")

    def test_unknown_key(self):
        with pytest.raises(ValueError, match="unknown config key"):
            TrainConfig.from_mapping({"optimizer": "adam"})

    def test_bad_value(self):
        with pytest.raises(ValueError, match="batch_size"):
            TrainConfig.from_mapping({"batch_size": "many"})

    def test_overrides_win(self, tmp_path):
        (tmp_path / "c.cfg").write_text("gamma = 0.2\nepochs = 4\n")
        cfg = load_config(tmp_path / "c.cfg", {"gamma": "0.7"})
        assert cfg.gamma == 0.7 and cfg.epochs == 4

    def test_dotted_snrcm(self):
        cfg = TrainConfig.from_mapping({"snrcm.kind": "uniform", "snrcm.lo": "-5", "snrcm.hi": "25"})
        assert cfg.snrcm == SnrcmConfig("uniform", -5.0, 25.0)
        cfg = TrainConfig.from_mapping({"epochs": "8", "snrcm.kind": "curriculum", "snrcm.preset": "cl-vad"})
        assert cfg.schedule().stage(0).lo == 0

    def test_kind_change_drops_old_fields(self):
        base = TrainConfig(snrcm=SnrcmConfig.parse("uniform:0:20"))
        cfg = TrainConfig.from_mapping({"epochs": "4", "snrcm.kind": "curriculum", "snrcm.preset": "cl-novad"},
                                       base)
        assert cfg.snrcm.lo is None


class TestCheckpoint:
    def ckpt(self, **kw):
        base = dict(params=init_params(seed=1), role="student", epoch=3, sample_rate=8000,
                    teacher_params=init_params(seed=2), loss_trace=[1.5, -0.25], config={"gamma": 0.01})
        base.update(kw)
        return Checkpoint(**base)

    def test_round_trip(self, tmp_path):
        c = self.ckpt()
        save_checkpoint(c, tmp_path / "c.json")
        back = load_checkpoint(tmp_path / "c.json")
        np.testing.assert_array_equal(back.params.values, c.params.values)
        np.testing.assert_array_equal(back.teacher_params.values, c.teacher_params.values)
        assert (back.role, back.epoch, back.sample_rate, back.loss_trace, back.config) == \
            ("student", 3, 8000, [1.5, -0.25], {"gamma": 0.01})
        assert back.params.arch == c.params.arch

    def test_bytes_stable(self, tmp_path):
        save_checkpoint(self.ckpt(), tmp_path / "a.json")
        save_checkpoint(load_checkpoint(tmp_path / "a.json"), tmp_path / "b.json")
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_layout_documented(self, tmp_path):
        save_checkpoint(self.ckpt(teacher_params=None), tmp_path / "c.json")
        doc = json.loads((tmp_path / "c.json").read_text())
        assert doc["format"] == "remixkit-checkpoint" and doc["version"] == 1
        assert [row[0] for row in doc["layout"]] == ["analysis", "mask_weight", "mask_bias", "synthesis"]
        assert doc["teacher_params"] is None and len(doc["params"]) == 1328

    def test_no_tmp_left(self, tmp_path):
        save_checkpoint(self.ckpt(), tmp_path / "c.json")
        assert [p.name for p in tmp_path.iterdir()] == ["c.json"]

    @pytest.mark.parametrize("edit,match", [
        (lambda d: d.update(version=2), "version"),
        (lambda d: d.update(format="other"), "not a remixkit"),
        (lambda d: d.pop("params"), "malformed"),
        (lambda d: d.update(params=[0.0, 1.0]), "malformed"),
    ])
    def test_rejects(self, tmp_path, edit, match):
        save_checkpoint(self.ckpt(), tmp_path / "c.json")
        doc = json.loads((tmp_path / "c.json").read_text())
        edit(doc)
        (tmp_path / "c.json").write_text(json.dumps(doc))
        with pytest.raises(DataError, match=match):
            load_checkpoint(tmp_path / "c.json")

    def test_unreadable(self, tmp_path):
        (tmp_path / "c.json").write_text("{not json")
        with pytest.raises(DataError):
            load_checkpoint(tmp_path / "c.json")
        with pytest.raises(DataError):
            load_checkpoint(tmp_path / "missing.json")
