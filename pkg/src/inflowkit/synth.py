"""Seeded synthetic corpora with planted feature archetypes.

Each archetype has a footprint template (a home system, or none for the
diffuse noise archetype), a per-feature fault rate and a development-time
distribution.  Trouble reports are attributed to the release that shipped
the feature and dated around that release.

Randomness is split into named streams, one per entity kind, and per-entity
sub-streams for commits and reports, so that changing one part of the
configuration does not reshuffle unrelated draws.
"""

from __future__ import annotations

import bisect
import dataclasses
import json
from dataclasses import asdict, dataclass, field
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from .corpus import CommitRecord, CorpusBundle, FeatureRecord, Release, TroubleReport, save_corpus, validate_bundle
from .errors import InvalidConfig

# stream ids; new kinds get new ids, existing ids never change
STREAMS = {"mix": 1, "features": 2, "commits": 3, "faults": 4, "reports": 5}

GROUND_TRUTH_FILE = "ground_truth.json"
START = date(2018, 1, 1)
RELEASE_DAY = 28
# chance that a feature also makes a one-file commit in a rare subsystem
RARE_TOUCH_PROB = 0.015


@dataclass(frozen=True)
class Archetype:
    name: str
    home_system: int | None  # None spreads changes over every system
    fault_rate: float
    dev_time_mean: float = 60.0
    dev_time_sd: float = 25.0
    share: float = 0.2
    files_scale: float = 96.0


def default_archetypes() -> tuple[Archetype, ...]:
    return (
        Archetype("causal", 0, fault_rate=16.0, dev_time_mean=90.0, dev_time_sd=30.0, share=0.22, files_scale=120.0),
        Archetype("steady", 1, fault_rate=0.4, dev_time_mean=45.0, share=0.22, files_scale=88.0),
        Archetype("small", 2, fault_rate=0.3, dev_time_mean=30.0, dev_time_sd=12.0, share=0.20, files_scale=56.0),
        Archetype("wide", 3, fault_rate=0.5, dev_time_mean=75.0, share=0.24, files_scale=144.0),
        Archetype("noise", None, fault_rate=0.5, dev_time_mean=60.0, dev_time_sd=40.0, share=0.12, files_scale=80.0),
    )


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 2024
    n_features: int = 2000
    n_subsystems: int = 19
    n_systems: int = 5
    months: int = 48
    cadence_switch_month: int = 24
    cluster_archetypes: tuple[Archetype, ...] = field(default_factory=default_archetypes)
    pre_release_detect_prob: float = 0.63
    early_post_prob: float = 0.58
    inflow_ar_coefficient: float = 0.6
    inflow_ar_sd: float = 0.3
    importance_class_weights: tuple[float, ...] = (0.06, 0.24, 0.36, 0.24, 0.10)
    # fault mass per feature after the cadence switch, relative to before
    post_switch_fault_scale: float = 1.0
    # concentration of the monthly Dirichlet archetype mix
    mix_concentration: float = 1.5
    pre_release_window_days: int = 27
    late_post_max_days: int = 240
    early_post_days: int = 122
    # subsystems that receive only a trickle of commits
    rare_subsystems: int = 2

    def validate(self) -> "SynthConfig":
        probs = {
            "pre_release_detect_prob": self.pre_release_detect_prob,
            "early_post_prob": self.early_post_prob,
        }
        for name, p in probs.items():
            if not 0.0 <= p <= 1.0:
                raise InvalidConfig(f"{name} must lie in [0, 1], got {p}")
        w = self.importance_class_weights
        if len(w) != 5 or min(w) < 0 or abs(sum(w) - 1.0) > 1e-9:
            raise InvalidConfig("importance_class_weights needs 5 nonnegative weights summing to 1")
        if not -1.0 < self.inflow_ar_coefficient < 1.0:
            raise InvalidConfig("inflow_ar_coefficient must lie in (-1, 1)")
        if self.months < 1 or not 0 <= self.cadence_switch_month < self.months:
            raise InvalidConfig("cadence_switch_month must be below months")
        if self.n_features < 0 or self.n_systems < 1:
            raise InvalidConfig("n_features must be >= 0 and n_systems >= 1")
        if self.n_subsystems < self.n_systems:
            raise InvalidConfig("need at least one subsystem per system")
        if not 0 <= self.rare_subsystems < self.n_subsystems:
            raise InvalidConfig("rare_subsystems out of range")
        if not self.cluster_archetypes:
            raise InvalidConfig("at least one archetype is required")
        names = [a.name for a in self.cluster_archetypes]
        if len(set(names)) != len(names):
            raise InvalidConfig("archetype names must be unique")
        for a in self.cluster_archetypes:
            if a.fault_rate < 0 or a.share <= 0 or a.files_scale < 1 or a.dev_time_mean < 0:
                raise InvalidConfig(f"archetype {a.name!r} has an invalid parameter")
            if a.home_system is not None and not 0 <= a.home_system < self.n_systems:
                raise InvalidConfig(f"archetype {a.name!r} names an unknown system")
        if self.post_switch_fault_scale < 0 or self.inflow_ar_sd < 0:
            raise InvalidConfig("scales must be nonnegative")
        if self.pre_release_window_days < 1 or self.late_post_max_days <= self.early_post_days:
            raise InvalidConfig("invalid dating windows")
        return self

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        d = dict(d)
        if "cluster_archetypes" in d:
            d["cluster_archetypes"] = tuple(Archetype(**a) for a in d["cluster_archetypes"])
        if "importance_class_weights" in d:
            d["importance_class_weights"] = tuple(d["importance_class_weights"])
        try:
            return cls(**d).validate()
        except TypeError as exc:
            raise InvalidConfig(str(exc)) from None


@dataclass
class GroundTruth:
    feature_archetype: dict[str, int]
    archetype_names: list[str]
    fault_rates: list[float]
    causal_archetype: int
    noise_archetype: int | None
    pre_release_detect_prob: float
    early_post_prob: float
    release_calendar: list[tuple[str, str]]
    release_factors: list[float]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "GroundTruth":
        d = dict(d)
        d["release_calendar"] = [tuple(r) for r in d["release_calendar"]]
        return cls(**d)

    def labels_for(self, feature_ids) -> np.ndarray:
        return np.array([self.feature_archetype[f] for f in feature_ids], dtype=int)


def _rng(seed: int, stream: str, *key: int) -> np.random.Generator:
    return np.random.default_rng([seed, STREAMS[stream], *key])


def month_start(m: int) -> date:
    return date(START.year + m // 12, m % 12 + 1, 1)


def release_months(config: SynthConfig) -> list[int]:
    """Every sixth month before the switch, every month from it on."""
    return [m for m in range(config.months) if m >= config.cadence_switch_month or (m + 1) % 6 == 0]


def subsystem_layout(config: SynthConfig) -> tuple[list[str], list[list[str]], list[list[bool]]]:
    """System names, subsystem names per system and a rare flag per subsystem.

    Subsystems are dealt round-robin; the last ``rare_subsystems`` dealt only
    receive occasional one-file commits, so they fall below the
    consolidation threshold.
    """
    systems = [f"SYS-{chr(ord('A') + s)}" for s in range(config.n_systems)]
    subs: list[list[str]] = [[] for _ in systems]
    rare: list[list[bool]] = [[] for _ in systems]
    for k in range(config.n_subsystems):
        s = k % config.n_systems
        subs[s].append(f"{systems[s][4:]}{len(subs[s]) + 1}")
        rare[s].append(k >= config.n_subsystems - config.rare_subsystems)
    return systems, subs, rare


def _spread_files(rng: np.random.Generator, files: int, n_units: int) -> np.ndarray:
    """Spread a file count over up to ``n_units`` units, each getting at least one."""
    k = min(files, n_units)
    out = np.zeros(n_units, dtype=int)
    chosen = np.sort(rng.choice(n_units, size=k, replace=False))
    out[chosen] = 1 + rng.multinomial(files - k, np.full(k, 1.0 / k))
    return out


def _feature_chunks(rng: np.random.Generator, arch: Archetype, n_systems: int) -> list[tuple[int, int]]:
    """(system, files) pairs realizing one feature's footprint."""
    if arch.home_system is not None:
        return [(arch.home_system, int(round(arch.files_scale * rng.uniform(0.75, 1.25))))]
    touched = rng.random(n_systems) < 0.6
    if not touched.any():
        touched[rng.integers(n_systems)] = True
    sizes = rng.uniform(0.1, 1.6, size=n_systems) * arch.files_scale
    return [(s, max(1, int(round(sizes[s])))) for s in range(n_systems) if touched[s]]


def generate_corpus(config: SynthConfig = SynthConfig()) -> tuple[CorpusBundle, GroundTruth]:
    config.validate()
    seed = config.seed
    archs = config.cluster_archetypes
    n_arch = len(archs)
    systems, subs, rare = subsystem_layout(config)

    # release calendar and the AR(1) fault factor per release
    r_months = release_months(config)
    releases = [
        Release(f"R{i + 1:03d}", month_start(m).replace(day=RELEASE_DAY)) for i, m in enumerate(r_months)
    ]
    rel_dates = [r.release_date for r in releases]
    frng = _rng(seed, "faults")
    phi, sd = config.inflow_ar_coefficient, config.inflow_ar_sd
    z = np.empty(len(releases))
    z_prev = frng.normal(0.0, sd)
    for i in range(len(releases)):
        z_prev = phi * z_prev + frng.normal(0.0, sd * np.sqrt(1 - phi * phi))
        z[i] = z_prev
    # mean-one lognormal factor
    factors = np.exp(z - sd * sd / 2)
    switch_date = month_start(config.cadence_switch_month)

    # monthly archetype mix
    shares = np.array([a.share for a in archs], dtype=float)
    shares = shares / shares.sum()
    mix = _rng(seed, "mix").dirichlet(config.mix_concentration * n_arch * shares, size=config.months)

    # feature-level draws
    last_day = (rel_dates[-1] - START).days
    frs = _rng(seed, "features")
    day_offsets = np.sort(frs.integers(0, last_day + 1, size=config.n_features))
    completion = [START + timedelta(days=int(d)) for d in day_offsets]
    arch_of = np.empty(config.n_features, dtype=int)
    dev_days = np.empty(config.n_features, dtype=int)
    for i, c in enumerate(completion):
        m = (c.year - START.year) * 12 + c.month - 1
        a = int(frs.choice(n_arch, p=mix[m]))
        arch_of[i] = a
        mean, spread = archs[a].dev_time_mean, max(archs[a].dev_time_sd, 1e-9)
        shape = (mean / spread) ** 2 if mean > 0 else 1.0
        dev_days[i] = int(round(frs.gamma(shape, spread * spread / mean))) if mean > 0 else 0

    features, commits, reports = [], [], []
    feature_arch: dict[str, int] = {}
    class_w = np.array(config.importance_class_weights)
    for i in range(config.n_features):
        fid = f"F{i + 1:05d}"
        arch = archs[arch_of[i]]
        feature_arch[fid] = int(arch_of[i])
        features.append(FeatureRecord(fid, completion[i], int(dev_days[i])))

        crng = _rng(seed, "commits", i)
        chunks = _feature_chunks(crng, arch, config.n_systems)
        pieces = []
        for s, files in chunks:
            regular = [j for j, r in enumerate(rare[s]) if not r]
            for j, f in zip(regular, _spread_files(crng, files, len(regular))):
                if f:
                    pieces.append((s, subs[s][j], int(f), int(crng.integers(0, dev_days[i] + 1))))
            for j in (j for j, r in enumerate(rare[s]) if r):
                if crng.random() < RARE_TOUCH_PROB:
                    pieces.append((s, subs[s][j], 1, int(crng.integers(0, dev_days[i] + 1))))
        # the last commit lands on the completion date
        s, sub, f, _ = pieces[-1]
        pieces[-1] = (s, sub, f, 0)
        for s, sub, f, back in pieces:
            commits.append(
                CommitRecord(
                    commit_id="",
                    feature_id=fid,
                    date=completion[i] - timedelta(days=back),
                    system=systems[s],
                    subsystem=sub,
                    files_changed=f,
                    loc_added=int(crng.poisson(6 * f)),
                    loc_removed=int(crng.poisson(2 * f)),
                    loc_modified=int(crng.poisson(3 * f)),
                )
            )

        # trouble reports against the release that ships the feature
        r = bisect.bisect_left(rel_dates, completion[i])
        rdate = rel_dates[r]
        rate = arch.fault_rate * factors[r]
        if rdate >= switch_date:
            rate *= config.post_switch_fault_scale
        trng = _rng(seed, "reports", i)
        n_tr = int(trng.poisson(rate))
        for _ in range(n_tr):
            if trng.random() < config.pre_release_detect_prob:
                when = rdate - timedelta(days=int(trng.integers(1, config.pre_release_window_days + 1)))
            elif trng.random() < config.early_post_prob:
                when = rdate + timedelta(days=int(trng.integers(0, config.early_post_days + 1)))
            else:
                when = rdate + timedelta(
                    days=int(trng.integers(config.early_post_days + 1, config.late_post_max_days + 1))
                )
            cls = int(trng.choice(5, p=class_w)) + 1
            reports.append((when, releases[r].release_id, cls))

    commits = [dataclasses.replace(c, commit_id=f"C{k + 1:06d}") for k, c in enumerate(commits)]
    trs = [TroubleReport(f"TR{k + 1:06d}", d, rid, cls) for k, (d, rid, cls) in enumerate(reports)]
    bundle = validate_bundle(CorpusBundle(tuple(commits), tuple(trs), tuple(features), tuple(releases)))

    noise = [k for k, a in enumerate(archs) if a.home_system is None]
    rates = [a.fault_rate for a in archs]
    gt = GroundTruth(
        feature_archetype=feature_arch,
        archetype_names=[a.name for a in archs],
        fault_rates=rates,
        causal_archetype=int(np.argmax(rates)),
        noise_archetype=noise[0] if noise else None,
        pre_release_detect_prob=config.pre_release_detect_prob,
        early_post_prob=config.early_post_prob,
        release_calendar=[(r.release_id, r.release_date.isoformat()) for r in releases],
        release_factors=[float(f) for f in factors],
    )
    return bundle, gt


def describe_ground_truth(gt: GroundTruth) -> dict:
    """Planted archetype table with membership counts and rates."""
    counts = np.bincount(
        np.fromiter(gt.feature_archetype.values(), dtype=int, count=len(gt.feature_archetype)),
        minlength=len(gt.archetype_names),
    )
    return {
        "archetypes": [
            {
                "id": k,
                "name": name,
                "fault_rate": gt.fault_rates[k],
                "features": int(counts[k]),
                "causal": k == gt.causal_archetype,
                "noise": k == gt.noise_archetype,
            }
            for k, name in enumerate(gt.archetype_names)
        ],
        "n_features": int(counts.sum()),
        "pre_release_detect_prob": gt.pre_release_detect_prob,
        "early_post_prob": gt.early_post_prob,
        "releases": len(gt.release_calendar),
    }


def write_corpus(bundle: CorpusBundle, gt: GroundTruth, directory) -> list[Path]:
    """Corpus CSVs plus ground_truth.json."""
    paths = save_corpus(bundle, directory)
    path = Path(directory) / GROUND_TRUTH_FILE
    path.write_text(json.dumps(gt.to_dict(), sort_keys=True, indent=1) + "\n", encoding="utf-8")
    return paths + [path]


def load_ground_truth(directory) -> GroundTruth:
    path = Path(directory) / GROUND_TRUTH_FILE
    return GroundTruth.from_dict(json.loads(path.read_text(encoding="utf-8")))
