from datetime import date

import pytest
from hypothesis import given
from hypothesis import strategies as st

from epicast.config import FoldSettings, RunConfig, load_preset, preset_names, resolve_config
from epicast.errors import InvalidValue, SchemaMismatch
from epicast.ingestion import AVG7_CASES, DAILY_CASES
from epicast.neural import TrainConfig

EXPERIMENTS = ["exp1-idt7", "exp2-idt14", "exp3-cnn", "exp4-lstm", "exp5-mtl", "exp6-cv-daily", "exp7-cv-7day"]


def test_all_experiment_presets_are_bundled():
    assert set(EXPERIMENTS) <= set(preset_names())


@pytest.mark.parametrize("name", sorted(set(EXPERIMENTS) | {"synthetic-daily", "synthetic-7day"}))
def test_presets_round_trip_and_resolve(name, synth):
    cfg = load_preset(name)
    assert RunConfig.from_json(cfg.to_json()) == cfg
    plan = cfg.fold_plan(synth)
    plan.check()
    spec = cfg.model_spec(synth)
    assert spec.target in spec.inputs  # every preset is autoregressive


def test_preset_hyperparameters():
    exp1, exp2 = load_preset("exp1-idt7"), load_preset("exp2-idt14")
    assert (exp1.model, exp1.window, exp1.m5.min_leaf) == ("m5", 7, 4)
    assert exp2.window == 14
    for name in ("exp3-cnn", "exp4-lstm", "exp5-mtl", "exp6-cv-daily", "exp7-cv-7day"):
        cfg = load_preset(name)
        assert (cfg.train.learning_rate, cfg.train.epochs, cfg.train.batch_size) == (5e-5, 1000, 1)
        assert cfg.train.loss == "mae" and len(cfg.seeds) == 5
    assert load_preset("exp5-mtl").horizon == 7
    assert load_preset("exp7-cv-7day").target == AVG7_CASES


def test_holdout_split_dates(synth):
    fold = load_preset("exp4-lstm").fold_plan(synth).folds[0]
    assert fold.train == (date(2020, 3, 1), date(2020, 10, 31))
    assert fold.validation == (date(2020, 11, 1), date(2020, 11, 23))
    assert fold.test == (date(2020, 11, 24), date(2020, 12, 31))
    fold = load_preset("exp1-idt7").fold_plan(synth).folds[0]
    assert fold.validation is None and fold.test == (date(2020, 11, 1), date(2020, 12, 2))


def test_resolved_inputs(synth):
    cfg = RunConfig()
    names = cfg.resolved_inputs(synth)
    assert names[-1] == DAILY_CASES and AVG7_CASES not in names
    assert RunConfig(autoregressive=False).resolved_inputs(synth) == names[:-1]
    assert RunConfig(inputs=("IRH", DAILY_CASES)).resolved_inputs(synth) == ("IRH", DAILY_CASES)
    assert RunConfig(model="persistence", autoregressive=False).model_spec(synth).inputs[-1] == DAILY_CASES


def test_bad_documents(tmp_path):
    with pytest.raises(InvalidValue):
        RunConfig.from_dict({"windw": 3})
    with pytest.raises(InvalidValue):
        RunConfig.from_dict({"train": {"lr": 1}})
    with pytest.raises(SchemaMismatch):
        RunConfig.from_dict({"format_version": 9})
    with pytest.raises(InvalidValue):
        RunConfig.from_json("[1, 2]")
    with pytest.raises(InvalidValue):
        RunConfig.from_json("{")
    with pytest.raises(InvalidValue):
        RunConfig(seeds=())
    with pytest.raises(InvalidValue):
        FoldSettings(end="Dec 24")
    with pytest.raises(InvalidValue):
        resolve_config("no-such-preset")
    path = tmp_path / "c.json"
    path.write_text(RunConfig(window=9).to_json())
    assert resolve_config(str(path)).window == 9


@given(
    st.integers(1, 30),
    st.integers(1, 7),
    st.sampled_from(["persistence", "m5", "cnn", "lstm-stl", "lstm-mtl"]),
    st.lists(st.integers(0, 1000), min_size=1, max_size=5, unique=True),
    st.floats(1e-6, 1.0),
    st.one_of(st.none(), st.dates(date(2020, 1, 1), date(2021, 1, 1))),
)
def test_config_round_trip(window, horizon, model, seeds, lr, anchor):
    cfg = RunConfig(window=window, horizon=horizon, model=model, seeds=tuple(seeds),
                    train=TrainConfig(learning_rate=lr), folds=FoldSettings(anchor=anchor))
    assert RunConfig.from_json(cfg.to_json()) == cfg
