"""End-to-end scenario engine: topology, data, attacks, judgement, accounting.

The engine drives one detection period (one day of ``period_slots``
readings) through the whole pipeline: key setup, encryption, signing,
block building with consensus, aggregate decryption, area judgement, and
per-meter detection.  Everything is seeded; a run is a pure function of
its configuration.

Readings are handled as fixed-point integers (the codec's reading units)
from ingestion onward, so plaintext sums and attack outputs are exact and
reproducible bit-for-bit.
"""

from __future__ import annotations

import csv
import json
import math
import random
import statistics
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from . import bls
from .crypto import MAX_READING_KWH, SystemParams, sha256, system_params
from .errors import (
    InsufficientHistory,
    ParseError,
    RangeError,
    TopologyError,
)
from .funcenc import (
    QuantizedFirstLayer,
    TimestampPoints,
    decrypt_aggregate,
    decrypt_inner_product,
    encrypt_reading,
    gen_detection_keys,
)
from .ledger import (
    Chain,
    ConsensusConfig,
    MeterValidator,
    ReportRecord,
    build_block,
    consensus_round,
    elect_miner,
    report_message,
    validate_chain,
    wire_report_bytes,
)
from .secureagg import MeterSecret, gen_meter_secret, run_key_setup

ATTACK_KINDS = ("f1", "f2", "f3", "f4", "f5", "f6")


def derive_seed(*parts) -> int:
    """Stable sub-seed from labels; immune to per-process hash salting."""
    blob = "|".join(str(p) for p in parts).encode()
    return int.from_bytes(sha256(b"SEED", blob), "big")


# ---------------------------------------------------------------------------
# Topology and readings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TopologyConfig:
    areas: int = 1
    meters_per_area: int = 20
    period_slots: int = 48
    seed: int = 0
    max_kwh_per_slot: float = 8.0  # declared cap; sizes the dlog windows

    def __post_init__(self):
        if self.areas < 1 or self.meters_per_area < 1:
            raise TopologyError("need at least one area with one meter")
        if self.period_slots < 2:
            raise TopologyError("a period needs at least two slots")
        if not 0 < self.max_kwh_per_slot <= MAX_READING_KWH:
            raise TopologyError("per-slot cap must be in (0, %g]" % MAX_READING_KWH)


@dataclass(frozen=True)
class ReadingSeries:
    """One meter-day of non-negative fixed-point readings."""

    meter_id: int
    day: str
    readings: Tuple[int, ...]

    def __post_init__(self):
        if any(r < 0 for r in self.readings):
            raise RangeError("readings must be non-negative")

    @property
    def total(self) -> int:
        return sum(self.readings)


def load_readings(path, codec, period_slots: int = 48) -> List[ReadingSeries]:
    """Parse the readings CSV: header meter_id,date,r1,...,r<d>; kWh decimals."""
    series = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("%s: empty file" % path) from None
        want = ["meter_id", "date"] + ["r%d" % (i + 1) for i in range(period_slots)]
        if [h.strip() for h in header] != want:
            raise ParseError("%s: bad header, expected %s..." % (path, want[:3]))
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != period_slots + 2:
                raise ParseError(
                    "%s:%d: expected %d readings, got %d"
                    % (path, lineno, period_slots, len(row) - 2)
                )
            try:
                meter_id = int(row[0])
                values = [float(v) for v in row[2:]]
            except ValueError as exc:
                raise ParseError("%s:%d: %s" % (path, lineno, exc)) from exc
            if any(v < 0 for v in values):
                raise RangeError("%s:%d: negative reading" % (path, lineno))
            readings = tuple(codec.encode_reading(v) for v in values)
            series.append(ReadingSeries(meter_id, row[1], readings))
    return series


def write_readings_csv(path, series: Sequence[ReadingSeries], codec) -> None:
    d = len(series[0].readings) if series else 48
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["meter_id", "date"] + ["r%d" % (i + 1) for i in range(d)])
        for s in series:
            writer.writerow(
                [s.meter_id, s.day]
                + [("%.3f" % codec.decode_reading(r)) for r in s.readings]
            )


# ---------------------------------------------------------------------------
# Synthetic household profiles
# ---------------------------------------------------------------------------


def synth_day(rng: random.Random, slots: int, base: float, morning: float,
              evening: float) -> List[float]:
    """One household-day in kWh: base load plus two activity peaks and noise."""
    out = []
    for t in range(slots):
        frac = t / slots
        kwh = base
        kwh += morning * math.exp(-((frac - 0.32) ** 2) / 0.004)
        kwh += evening * math.exp(-((frac - 0.79) ** 2) / 0.006)
        kwh *= 1.0 + rng.uniform(-0.15, 0.15)
        out.append(max(kwh, 0.0))
    return out


def generate_dataset(
    topology: TopologyConfig, days: int, codec, start_meter_id: int = 0
) -> List[ReadingSeries]:
    """Seeded synthetic corpus: meters_per_area households over ``days`` days."""
    rng = random.Random(topology.seed)
    series = []
    for i in range(topology.meters_per_area):
        meter_id = start_meter_id + i
        base = rng.uniform(0.08, 0.35)
        morning = rng.uniform(0.3, 1.4)
        evening = rng.uniform(0.5, 2.2)
        for day in range(days):
            kwh = synth_day(rng, topology.period_slots, base, morning, evening)
            kwh = [min(v, topology.max_kwh_per_slot) for v in kwh]
            series.append(
                ReadingSeries(
                    meter_id,
                    "day-%03d" % day,
                    tuple(codec.encode_reading(v) for v in kwh),
                )
            )
    return series


# ---------------------------------------------------------------------------
# Theft attacks f1..f6
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AttackSpec:
    """Parameters of one synthetic theft behaviour.

    Draws (alpha, per-slot betas, the f6 window) come from ``seed`` when
    not pinned explicitly, matching the published generator: alpha and
    beta in (0.1, 0.8), window start in [0, 42], width in [6, 48].
    """

    kind: str
    seed: int = 0
    alpha: Optional[float] = None
    window: Optional[Tuple[int, int]] = None

    def __post_init__(self):
        if self.kind not in ATTACK_KINDS:
            raise ValueError("unknown attack kind %r" % self.kind)
        if self.alpha is not None and not 0.1 <= self.alpha <= 0.8:
            raise ValueError("alpha must lie in [0.1, 0.8]")
        if self.window is not None:
            ts, te = self.window
            if not (0 <= ts <= 42 and 6 <= te - ts <= 48):
                raise ValueError("window must satisfy ts in [0,42], te-ts in [6,48]")


def apply_attack(spec: AttackSpec, series: ReadingSeries) -> ReadingSeries:
    """Tampered copy of one meter-day, exact in fixed-point units.

    f1 scales the day, f2 scales each slot independently, f3 reports the
    flat daily mean, f4 a scaled mean, f5 reverses the day, f6 blanks a
    random window.
    """
    rng = random.Random(derive_seed(spec.seed, spec.kind, series.meter_id, series.day))
    r = list(series.readings)
    d = len(r)
    kind = spec.kind
    if kind == "f1":
        alpha = spec.alpha if spec.alpha is not None else rng.uniform(0.1, 0.8)
        out = [round(alpha * v) for v in r]
    elif kind == "f2":
        out = [round(rng.uniform(0.1, 0.8) * v) for v in r]
    elif kind == "f3":
        mean = statistics.fmean(r)
        out = [round(mean)] * d
    elif kind == "f4":
        mean = statistics.fmean(r)
        out = [round(rng.uniform(0.1, 0.8) * mean) for _ in range(d)]
    elif kind == "f5":
        out = r[::-1]
    else:  # f6
        if spec.window is not None:
            ts, te = spec.window
        else:
            ts = rng.randint(0, 42)
            te = ts + rng.randint(6, 48)
        out = [0 if ts < t < te else v for t, v in enumerate(r, start=1)]
    return ReadingSeries(series.meter_id, series.day, tuple(out))


# ---------------------------------------------------------------------------
# Judgement
# ---------------------------------------------------------------------------


class Verdict:
    THEFT = "theft"
    CLEAR = "clear"


@dataclass(frozen=True)
class JudgementInput:
    e_dtm: int
    e_sum: int
    e_tl: int
    epsilon: int

    def __post_init__(self):
        if min(self.e_dtm, self.e_sum, self.e_tl, self.epsilon) < 0:
            raise RangeError("judgement inputs must be non-negative")


def judge_area(j: JudgementInput) -> str:
    """Theft iff supply strictly exceeds reported sum plus loss plus tolerance."""
    return Verdict.THEFT if j.e_dtm > j.e_sum + j.e_tl + j.epsilon else Verdict.CLEAR


def estimate_technical_loss(
    area_history: Sequence[Tuple[int, int]]
) -> Tuple[int, int]:
    """(mean gap, 3x sample standard deviation) over honest history days."""
    if len(area_history) < 7:
        raise InsufficientHistory(
            "need at least 7 honest history points, got %d" % len(area_history)
        )
    gaps = [e_dtm - e_sum for e_dtm, e_sum in area_history]
    e_tl = round(statistics.fmean(gaps))
    epsilon = round(3 * statistics.stdev(gaps))
    return e_tl, epsilon


# ---------------------------------------------------------------------------
# Attack-probability calculator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AttackProbabilityParams:
    p_sm: float
    p_c: float
    p_k: float
    p_mn: float
    m: int

    def __post_init__(self):
        for name in ("p_sm", "p_c", "p_k", "p_mn"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError("%s must lie strictly inside (0, 1)" % name)
        if self.m < 1:
            raise ValueError("m must be positive")


def attack_success_probability(
    scenario: int, stage: str, p: AttackProbabilityParams
) -> float:
    """Success probability of the destroy (1) / tamper (2) attacker per stage."""
    if scenario not in (1, 2):
        raise ValueError("scenario must be 1 or 2")
    if stage not in ("pre", "transit", "received"):
        raise ValueError("stage must be pre|transit|received")
    if scenario == 1:
        if stage == "pre":
            return p.p_sm**p.m
        if stage == "transit":
            return p.p_c**p.m
        return p.p_mn
    keys = p.p_k**p.m
    if stage == "transit":
        return p.p_c**p.m * keys
    return p.p_sm**p.m * keys


# ---------------------------------------------------------------------------
# Byte accounting
# ---------------------------------------------------------------------------


def report_size_bytes(n_dw: int, mode: str = "per-report", d: Optional[int] = None):
    """Bytes a meter spends to report one reading.

    per-report resends the detection keys with every reading (40 bytes of
    cipher + 80 of timestamp pair + 40*n_dw of keys + 40 of signature +
    40 of public key).  per-period amortizes the keys over the d readings
    of a detection period and returns an exact Fraction.
    """
    if n_dw < 1:
        raise ValueError("n_dw must be at least 1")
    fixed = 40 + 80 + 40 + 40
    if mode == "per-report":
        return fixed + 40 * n_dw
    if mode == "per-period":
        if not d or d < 1:
            raise ValueError("per-period accounting needs the period length d")
        return Fraction(fixed) + Fraction(40 * n_dw, d)
    raise ValueError("mode must be per-report or per-period")


# ---------------------------------------------------------------------------
# Scenario engine
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AttackAssignment:
    meter_id: int
    spec: AttackSpec


@dataclass
class AreaReport:
    area_id: int
    miner_id: int
    chain: Chain
    chain_valid: bool
    consensus_committed: int
    slot_totals: List[int]
    plaintext_totals: List[int]
    e_dtm: int
    e_tl: int
    epsilon: int
    verdict: str
    detection: Dict[int, float]  # meter id -> theft probability
    report_bytes_measured: int
    phase_seconds: Dict[str, float]


@dataclass
class PeriodReport:
    seed: int
    day: str
    areas: List[AreaReport]

    def to_json(self) -> str:
        doc = {
            "seed": self.seed,
            "day": self.day,
            "areas": [
                {
                    "area_id": a.area_id,
                    "miner_id": a.miner_id,
                    "chain_valid": a.chain_valid,
                    "consensus_committed": a.consensus_committed,
                    "slot_totals": a.slot_totals,
                    "plaintext_totals": a.plaintext_totals,
                    "e_dtm": a.e_dtm,
                    "e_tl": a.e_tl,
                    "epsilon": a.epsilon,
                    "verdict": a.verdict,
                    "detection": {str(k): v for k, v in sorted(a.detection.items())},
                    "report_bytes_measured": a.report_bytes_measured,
                }
                for a in self.areas
            ],
        }
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"


@dataclass(frozen=True)
class LossModel:
    """Distribution losses seen by the transformer meter, in codec units."""

    loss_rate: float = 0.03
    noise_sigma_units: int = 400  # 0.4 kWh per day at the default codec

    def dtm_units(self, true_total: int, rng: random.Random) -> int:
        loss = round(true_total * self.loss_rate)
        noise = round(rng.gauss(0.0, self.noise_sigma_units))
        return max(true_total + loss + noise, 0)


def simulate_judgement_days(
    topology: TopologyConfig,
    dataset_by_day: Dict[str, List[ReadingSeries]],
    attacks: Sequence[AttackAssignment],
    loss_model: LossModel,
    warmup: Sequence[Tuple[int, int]],
) -> Dict[str, str]:
    """Plaintext-level judgement sweep over many days.

    The cryptographic pipeline recovers slot sums exactly (proven by the
    encryption tests), so multi-day judgement studies run on plaintext
    totals with the same loss model and estimator.
    """
    e_tl, epsilon = estimate_technical_loss(warmup)
    rng = random.Random(derive_seed(topology.seed, "judgement"))
    verdicts = {}
    by_attack = {a.meter_id: a.spec for a in attacks}
    for day in sorted(dataset_by_day):
        series = dataset_by_day[day]
        true_total = sum(s.total for s in series)
        reported = 0
        for s in series:
            spec = by_attack.get(s.meter_id)
            reported += apply_attack(spec, s).total if spec else s.total
        e_dtm = loss_model.dtm_units(true_total, rng)
        verdicts[day] = judge_area(
            JudgementInput(e_dtm, reported, e_tl, epsilon)
        )
    return verdicts


def honest_warmup_history(
    topology: TopologyConfig,
    dataset_by_day: Dict[str, List[ReadingSeries]],
    loss_model: LossModel,
) -> List[Tuple[int, int]]:
    """(e_dtm, e_sum) pairs over honest days, for the loss estimator."""
    rng = random.Random(derive_seed(topology.seed, "warmup"))
    history = []
    for day in sorted(dataset_by_day):
        total = sum(s.total for s in dataset_by_day[day])
        history.append((loss_model.dtm_units(total, rng), total))
    return history


def run_period(
    topology: TopologyConfig,
    dataset: Sequence[ReadingSeries],
    attacks: Sequence[AttackAssignment],
    model,
    params: Optional[SystemParams] = None,
    consensus: Optional[ConsensusConfig] = None,
    loss_model: Optional[LossModel] = None,
    calibration: Optional[Tuple[int, int]] = None,
) -> PeriodReport:
    """Drive one detection day end to end for every configured area.

    ``dataset`` holds one honest ReadingSeries per meter for the chosen
    day; ``model`` is the loaded detector ModelWeights (its first layer
    shapes the detection keys).  ``calibration`` is the (e_tl, epsilon)
    pair from the loss estimator; a 3%-plus-noise transformer model
    supplies the supply-side reading.
    """
    from .detector import first_layer_private, infer_from_activations

    params = params or system_params()
    consensus = consensus or ConsensusConfig()
    loss_model = loss_model or LossModel()
    d = topology.period_slots
    m = topology.meters_per_area
    if not dataset:
        raise TopologyError("empty dataset")
    day = dataset[0].day
    layer: QuantizedFirstLayer = model.first
    if layer.d != d:
        raise TopologyError("model first layer expects d=%d slots" % layer.d)

    by_meter = {s.meter_id: s for s in dataset if s.day == day}
    all_ids = sorted(by_meter)
    if len(all_ids) != topology.areas * m:
        raise TopologyError(
            "dataset has %d meters for day %s, topology wants %d"
            % (len(all_ids), day, topology.areas * m)
        )
    by_attack = {a.meter_id: a.spec for a in attacks}

    areas = []
    for area_idx in range(topology.areas):
        area_ids = all_ids[area_idx * m : (area_idx + 1) * m]
        rng = random.Random(derive_seed(topology.seed, "area", area_idx))
        t0 = time.perf_counter()

        # --- key setup -----------------------------------------------------
        meters: Dict[int, MeterSecret] = {
            i: gen_meter_secret(params, rng) for i in area_ids
        }
        da = run_key_setup(params, meters)
        period = [
            TimestampPoints.for_label(params, b"%s/slot-%02d" % (day.encode(), t))
            for t in range(d)
        ]
        sign_keys = {i: bls.SigningKey(meters[i].x) for i in area_ids}
        verify_keys = {i: bls.verify_key(params, sign_keys[i]) for i in area_ids}
        dw_sets = {
            i: gen_detection_keys(params, meters[i].s, layer, period)
            for i in area_ids
        }
        t_setup = time.perf_counter() - t0

        # --- reporting -----------------------------------------------------
        t0 = time.perf_counter()
        reported: Dict[int, ReadingSeries] = {}
        for i in area_ids:
            spec = by_attack.get(i)
            reported[i] = apply_attack(spec, by_meter[i]) if spec else by_meter[i]
        ciphers = {
            i: [
                encrypt_reading(params, meters[i].s, period[t], reported[i].readings[t])
                for t in range(d)
            ]
            for i in area_ids
        }
        t_report = time.perf_counter() - t0

        # --- ledger --------------------------------------------------------
        t0 = time.perf_counter()
        miner_id = elect_miner(area_ids, epoch=0)
        chain = Chain()
        refs = {i: chain.register_dw(dw_sets[i]) for i in area_ids}
        committed = 0
        measured_bytes = 0
        for t in range(d):
            label = period[t].period_label
            records = []
            for i in area_ids:
                msg = report_message(ciphers[i][t], period[t], dw_sets[i], verify_keys[i])
                sig = bls.sign(params, sign_keys[i], msg)
                records.append(
                    ReportRecord(i, ciphers[i][t], label, refs[i], sig, verify_keys[i])
                )
                if t == 0 and i == area_ids[0]:
                    measured_bytes = len(
                        wire_report_bytes(
                            ciphers[i][t], period[t], dw_sets[i], sig, verify_keys[i]
                        )
                    )
            block = build_block(
                params, chain.head_hash, chain.next_height, records, t, label,
                chain.dw_registry, rng,
            )
            validators = [
                MeterValidator(i, rec)
                for i, rec in zip(area_ids, records)
                if i != miner_id
            ]
            result = consensus_round(
                params, block, validators, consensus, chain.head_hash, label,
                chain.dw_registry, rng,
            )
            if result.committed:
                chain.append(block)
                committed += 1
        chain_ok = validate_chain(params, chain) is None
        t_ledger = time.perf_counter() - t0

        # --- aggregation ---------------------------------------------------
        t0 = time.perf_counter()
        max_units = round(topology.max_kwh_per_slot * params.codec.reading_scale)
        slot_totals = [
            decrypt_aggregate(
                params,
                [ciphers[i][t] for i in area_ids],
                da,
                period[t],
                m * max_units,
            )
            for t in range(d)
        ]
        plaintext_totals = [
            sum(reported[i].readings[t] for i in area_ids) for t in range(d)
        ]
        t_aggregate = time.perf_counter() - t0

        # --- judgement -----------------------------------------------------
        true_total = sum(by_meter[i].total for i in area_ids)
        e_dtm = loss_model.dtm_units(true_total, rng)
        if calibration is not None:
            e_tl, epsilon = calibration
        else:
            e_tl = round(true_total * loss_model.loss_rate)
            epsilon = 3 * loss_model.noise_sigma_units
        verdict = judge_area(JudgementInput(e_dtm, sum(slot_totals), e_tl, epsilon))

        # --- detection -----------------------------------------------------
        t0 = time.perf_counter()
        bound = layer.dlog_bound(max_units)
        detection = {}
        for i in area_ids:
            products = [
                decrypt_inner_product(
                    params, ciphers[i], layer.column(c), dw_sets[i].dw[c], bound
                )
                for c in range(layer.n)
            ]
            activations = first_layer_private(products, layer)
            probs = infer_from_activations(activations, model)
            detection[i] = float(probs[1])
        t_detect = time.perf_counter() - t0

        areas.append(
            AreaReport(
                area_id=area_idx,
                miner_id=miner_id,
                chain=chain,
                chain_valid=chain_ok,
                consensus_committed=committed,
                slot_totals=slot_totals,
                plaintext_totals=plaintext_totals,
                e_dtm=e_dtm,
                e_tl=e_tl,
                epsilon=epsilon,
                verdict=verdict,
                detection=detection,
                report_bytes_measured=measured_bytes,
                phase_seconds={
                    "setup": t_setup,
                    "report": t_report,
                    "ledger": t_ledger,
                    "aggregate": t_aggregate,
                    "detect": t_detect,
                },
            )
        )
    return PeriodReport(topology.seed, day, areas)
