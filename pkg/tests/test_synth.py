import dataclasses
from collections import Counter

import numpy as np
import pytest

from inflowkit import corpus, synth
from inflowkit.errors import InvalidConfig
from inflowkit.synth import Archetype, SynthConfig

SMALL = dict(n_features=300, months=24, cadence_switch_month=12)


def test_default_scale(default_synth):
    bundle, gt = default_synth
    cfg = SynthConfig()
    assert len(bundle.features) == cfg.n_features == 2000
    assert len({c.subsystem for c in bundle.commits}) <= cfg.n_subsystems == 19
    assert 5000 <= len(bundle.trouble_reports) <= 7000
    assert set(gt.feature_archetype) == {f.feature_id for f in bundle.features}


def test_release_cadence():
    months = synth.release_months(SynthConfig())
    before = [m for m in months if m < 24]
    after = [m for m in months if m >= 24]
    assert before == [5, 11, 17, 23]
    assert after == list(range(24, 48))
    assert len(months) == 28


def test_zero_rates_give_no_reports():
    arch = tuple(dataclasses.replace(a, fault_rate=0.0) for a in synth.default_archetypes())
    bundle, _ = synth.generate_corpus(SynthConfig(cluster_archetypes=arch, **SMALL))
    assert bundle.trouble_reports == ()


def test_determinism(tmp_path):
    cfg = SynthConfig(seed=11, **SMALL)
    a = synth.write_corpus(*synth.generate_corpus(cfg), tmp_path / "a")
    b = synth.write_corpus(*synth.generate_corpus(cfg), tmp_path / "b")
    assert len(a) == 5
    for p, q in zip(a, b):
        assert p.read_bytes() == q.read_bytes()


def test_written_corpus_loads_and_links(tmp_path):
    bundle, gt = synth.generate_corpus(SynthConfig(seed=3, **SMALL))
    synth.write_corpus(bundle, gt, tmp_path)
    loaded = corpus.load_corpus_dir(tmp_path)
    assert loaded == bundle
    assert synth.load_ground_truth(tmp_path) == gt
    assert loaded.orphan_commits() == []


def test_tr_dates_consistent_with_calendar(default_synth):
    bundle, _ = default_synth
    rel = bundle.release_by_id()
    cfg = SynthConfig()
    for t in bundle.trouble_reports:
        d = (t.date_reported - rel[t.release_id].release_date).days
        assert -cfg.pre_release_window_days <= d <= cfg.late_post_max_days
    linked = corpus.link_features_to_releases(bundle)
    assert linked.unreleased_features() == []


def test_planted_fraction(default_synth):
    bundle, _ = default_synth
    trs = bundle.trouble_reports
    rel = bundle.release_by_id()
    pre = sum(t.date_reported < rel[t.release_id].release_date for t in trs) / len(trs)
    assert len(trs) >= 5000
    assert abs(pre - 0.63) <= 0.03


def test_importance_classes_multinomial(default_synth):
    bundle, _ = default_synth
    counts = Counter(t.importance_class for t in bundle.trouble_reports)
    n = len(bundle.trouble_reports)
    for k, w in zip(range(1, 6), SynthConfig().importance_class_weights):
        assert abs(counts[k] / n - w) < 4 * np.sqrt(w * (1 - w) / n) + 1e-9


def test_inflow_drops_after_cadence_switch():
    """Per-release inflow with constant per-feature rates, averaged over 10 seeds."""
    pre, post = [], []
    for seed in range(10):
        bundle, _ = synth.generate_corpus(SynthConfig(seed=seed, n_features=600))
        per = Counter(t.release_id for t in bundle.trouble_reports)
        for r in bundle.ordered_releases():
            month = (r.release_date.year - synth.START.year) * 12 + r.release_date.month - 1
            (pre if month < 24 else post).append(per.get(r.release_id, 0))
    assert np.mean(pre) > np.mean(post)


def test_describe_ground_truth():
    two = (Archetype("a", 0, 1.0), Archetype("b", 1, 2.0, share=0.8))
    bundle, gt = synth.generate_corpus(SynthConfig(cluster_archetypes=two, **SMALL))
    rep = synth.describe_ground_truth(gt)
    assert len(rep["archetypes"]) == 2
    assert [a["fault_rate"] for a in rep["archetypes"]] == [1.0, 2.0]
    assert sum(a["features"] for a in rep["archetypes"]) == rep["n_features"] == 300
    assert gt.causal_archetype == 1


@pytest.mark.parametrize(
    "override",
    [
        {"pre_release_detect_prob": 1.5},
        {"importance_class_weights": (0.5, 0.5, 0.5, 0.0, 0.0)},
        {"cadence_switch_month": 48},
        {"inflow_ar_coefficient": 1.0},
    ],
)
def test_invalid_config(override):
    with pytest.raises(InvalidConfig):
        SynthConfig(**override).validate()


def test_from_dict_rejects_unknown():
    with pytest.raises(InvalidConfig):
        SynthConfig.from_dict({"n_featurez": 3})
    assert SynthConfig.from_dict({"seed": 5}).seed == 5


def test_streams_isolated():
    """Changing the TR dating probability leaves features and commits untouched."""
    a, _ = synth.generate_corpus(SynthConfig(seed=4, **SMALL))
    b, _ = synth.generate_corpus(SynthConfig(seed=4, pre_release_detect_prob=0.3, **SMALL))
    assert a.features == b.features and a.commits == b.commits
    assert a.trouble_reports != b.trouble_reports
