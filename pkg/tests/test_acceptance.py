"""Acceptance gate: one test per release criterion.

Each test prints a single ``[acceptance] criterion N ...: PASS|FAIL`` line
(run with ``pytest tests/test_acceptance.py -s`` to see them live) and then
asserts, so the suite both reports and enforces the gate. Tolerances are
pinned here and nowhere else.
"""

import time

import numpy as np
import pytest

from segcalib import (
    BinConfig,
    build_report,
    dataset_histogram,
    dice_score,
    fit_temperature,
    ml1_ace,
    ml1_ece,
    ml1_mce,
)
from segcalib.calib_loss import ace_loss, softmax_with_grad
from segcalib.gradcheck import (
    LOSSES,
    central_difference,
    check_chained_gradient,
    check_loss_gradient,
)
from segcalib.harness import (
    TrainConfig,
    fit_validation_temperature,
    evaluate,
    generate_dataset,
    predict_probs,
    train,
)

from conftest import random_case
from oracles import brute_force_metrics, brute_force_report

NUM_SEEDS = 5


def _criterion(number: int, name: str, passed: bool, detail: str) -> None:
    status = "PASS" if passed else "FAIL"
    print(f"[acceptance] criterion {number} ({name}): {status} — {detail}")
    assert passed, f"criterion {number} ({name}): {detail}"


@pytest.fixture(scope="module")
def harness_runs():
    """Train dice and dice+ace models over NUM_SEEDS seeds; shared by 5-7."""
    start = time.monotonic()
    evals = {"dice": [], "dice+ace": []}
    reports = {"dice": [], "dice+ace": []}
    ts_evals = []
    sample = None
    for seed in range(NUM_SEEDS):
        for loss in ("dice", "dice+ace"):
            cfg = TrainConfig(loss=loss, seed=seed)
            train_cases, val_cases, test_cases = generate_dataset(cfg)
            model, _ = train(cfg, train_cases, val_cases)
            evals[loss].append(evaluate(model, test_cases, cfg.bin_config))
            for case in test_cases:
                probs = predict_probs(model, case)
                reports[loss].append(
                    build_report(probs, case.labels, cfg.bin_config)
                )
            if loss == "dice":
                fit = fit_validation_temperature(model, val_cases, seed=seed)
                ts_evals.append(evaluate(model, test_cases, cfg.bin_config,
                                         temperature=fit.temperature))
                if sample is None:
                    sample = (model, test_cases, fit.temperature)
    return {
        "evals": evals,
        "reports": reports,
        "ts_evals": ts_evals,
        "sample": sample,
        "elapsed": time.monotonic() - start,
    }


def test_criterion_1_oracle_equivalence():
    start = time.monotonic()
    rng = np.random.default_rng(1001)
    worst = 0.0
    for trial in range(200):
        num_classes = int(rng.integers(1, 5))
        num_voxels = 10_000 if trial % 50 == 0 else int(rng.integers(10, 500))
        num_bins = int(rng.choice([5, 20]))
        probs, labels = random_case(rng, num_voxels, num_classes,
                                    simplex=num_classes >= 2)
        labels = rng.integers(0, max(num_classes, 2), size=num_voxels)
        report = build_report(probs, labels, BinConfig(num_bins))
        counts, sum_prob, sum_label, total = brute_force_report(
            probs, labels, num_bins
        )
        np.testing.assert_array_equal(report.counts, counts)
        np.testing.assert_array_equal(report.sum_label, sum_label)
        assert report.total_voxels == total
        ece, ace, mce = brute_force_metrics(counts, sum_prob, sum_label, total)
        # raw per-bin sums are O(count); scale their tolerance accordingly
        sum_scale = np.maximum(1.0, np.abs(sum_prob))
        worst = max(
            worst,
            float((np.abs(report.sum_prob - sum_prob) / sum_scale).max()),
            float(np.abs(ml1_ece(report) - ece).max()),
            float(np.abs(ml1_ace(report) - ace).max()),
            float(np.abs(ml1_mce(report) - mce).max()),
        )
    elapsed = time.monotonic() - start
    _criterion(
        1, "oracle equivalence",
        worst < 1e-12 and elapsed < 10.0,
        f"max deviation {worst:.3g} over 200 instances in {elapsed:.1f}s "
        f"(require < 1e-12, < 10s)",
    )


def test_criterion_2_gradients_match_finite_differences():
    start = time.monotonic()
    rng = np.random.default_rng(1002)
    worst_direct, worst_chained = 0.0, 0.0
    for _ in range(100):
        for name in sorted(LOSSES):
            worst_direct = max(worst_direct, check_loss_gradient(name, rng))
    for _ in range(100):
        for name in sorted(LOSSES):
            worst_chained = max(worst_chained, check_chained_gradient(name, rng))
    elapsed = time.monotonic() - start
    _criterion(
        2, "analytic gradients",
        worst_direct < 1e-5 and worst_chained < 1e-4 and elapsed < 30.0,
        f"direct {worst_direct:.3g} (< 1e-5), chained {worst_chained:.3g} "
        f"(< 1e-4), {elapsed:.1f}s (< 30s)",
    )


def test_criterion_3_hand_fixture(hand_fixture):
    probs, labels, cfg = hand_fixture
    report = build_report(probs, labels, cfg)
    values = (float(ml1_ace(report)[0]), float(ml1_ece(report)[0]),
              float(ml1_mce(report)[0]))
    out = ace_loss(probs, labels, cfg)
    # cross-check the expected constant gradient by finite differences
    fd = central_difference(lambda p: ace_loss(p, labels, cfg).value,
                            probs.copy())
    grad_ok = (np.allclose(out.grad_probs, -0.25, atol=1e-12)
               and np.allclose(fd, -0.25, atol=1e-6))
    values_ok = all(abs(v - 0.2) < 1e-12 for v in values)
    _criterion(
        3, "hand-derived fixture",
        values_ok and grad_ok,
        f"ace/ece/mce = {values} (expect 0.2 each), ace grad "
        f"{out.grad_probs.ravel().tolist()} (expect -0.25 per voxel, "
        f"confirmed by finite differences)",
    )


def test_criterion_4_bin_stability():
    start = time.monotonic()
    rng = np.random.default_rng(1004)
    p = rng.uniform(0.0, 1.0, size=200_000)
    labels = (rng.uniform(size=p.size) < p ** 2).astype(np.int64)
    probs = p[None, :]
    coarse = build_report(probs, labels, BinConfig(10))
    fine = build_report(probs, labels, BinConfig(100))
    rel = {}
    for name, fn in (("ace", ml1_ace), ("ece", ml1_ece)):
        a, b = float(fn(coarse)[0]), float(fn(fine)[0])
        rel[name] = abs(a - b) / max(a, b)
    elapsed = time.monotonic() - start
    _criterion(
        4, "bin stability",
        max(rel.values()) < 0.05 and elapsed < 10.0,
        f"relative change M=10 -> M=100: ace {rel['ace']:.3%}, "
        f"ece {rel['ece']:.3%} (require < 5%), {elapsed:.1f}s (< 10s)",
    )


def test_criterion_5_directional_reproduction(harness_runs):
    evals = harness_runs["evals"]
    ace_dice = np.mean([e.mean_ace for e in evals["dice"]])
    ace_both = np.mean([e.mean_ace for e in evals["dice+ace"]])
    dice_dice = np.mean([e.mean_dice for e in evals["dice"]])
    dice_both = np.mean([e.mean_dice for e in evals["dice+ace"]])
    reduction = (ace_dice - ace_both) / ace_dice
    drop = dice_dice - dice_both
    elapsed = harness_runs["elapsed"]
    _criterion(
        5, "directional reproduction",
        reduction >= 0.30 and drop <= 0.02 and elapsed < 300.0,
        f"test ACE {ace_dice:.4f} -> {ace_both:.4f} "
        f"({reduction:.1%} reduction, require >= 30%); Dice "
        f"{dice_dice:.4f} -> {dice_both:.4f} (drop {drop:+.4f}, "
        f"require <= 0.02); {NUM_SEEDS} seeds in {elapsed:.0f}s (< 300s)",
    )


def test_criterion_6_temperature_scaling(harness_runs):
    # 6a: a known scaling factor is recovered
    rng = np.random.default_rng(1006)
    logits = rng.standard_normal((2, 100_000)) * 2.0
    probs, _ = softmax_with_grad(logits)
    labels = (rng.uniform(size=logits.shape[1]) > probs[0]).astype(np.int64)
    factor = 2.5
    fit = fit_temperature(logits * factor, labels, seed=0)
    factor_err = abs(fit.temperature - factor) / factor

    # 6b: temperature scaling never changes the argmax prediction or Dice
    model, test_cases, temperature = harness_runs["sample"]
    argmax_ok = True
    for case in test_cases:
        raw = predict_probs(model, case)
        scaled = predict_probs(model, case, temperature)
        argmax_ok &= bool(np.array_equal(raw.argmax(axis=0),
                                         scaled.argmax(axis=0)))
        argmax_ok &= bool(np.array_equal(dice_score(raw, case.labels),
                                         dice_score(scaled, case.labels)))

    # 6c: on the dice-only model, scaling helps ACE less than retraining does
    ace_dice = np.mean([e.mean_ace for e in harness_runs["evals"]["dice"]])
    ace_ts = np.mean([e.mean_ace for e in harness_runs["ts_evals"]])
    ace_retrain = np.mean([e.mean_ace
                           for e in harness_runs["evals"]["dice+ace"]])
    ordering_ok = ace_retrain < ace_ts <= ace_dice
    _criterion(
        6, "temperature scaling",
        factor_err < 0.02 and argmax_ok and ordering_ok,
        f"recovered T {fit.temperature:.4f} for factor {factor} "
        f"(error {factor_err:.2%}, require < 2%); argmax/Dice invariant: "
        f"{argmax_ok}; ACE dice {ace_dice:.4f} >= scaled {ace_ts:.4f} > "
        f"retrained {ace_retrain:.4f}",
    )


def _off_band_mass(reports, class_id):
    hist = dataset_histogram(reports, class_id)
    m_bins, k_bins = hist.counts.shape
    conf = (np.arange(m_bins)[:, None] + 0.5) / m_bins
    freq = (np.arange(k_bins)[None, :] + 0.5) / k_bins
    band = np.abs(conf - freq) <= 1.0 / m_bins + 1.0 / k_bins
    return int(hist.counts[~band].sum()), int(hist.counts.sum())


def test_criterion_7_dataset_histogram(harness_runs):
    # 7a: an exactly calibrated dataset puts all mass on the diagonal band
    m_bins = 20
    probs_list, labels_list = [], []
    for m in range(m_bins):
        center = (m + 0.5) / m_bins
        n = 40
        k = 2 * m + 1  # center * n exactly
        probs_list.append(np.full(n, center))
        labels_list.append(np.array([1] * k + [0] * (n - k)))
    probs = np.concatenate(probs_list)[None, :]
    labels = np.concatenate(labels_list)
    report = build_report(probs, labels, BinConfig(m_bins))
    off_cal, total_cal = _off_band_mass([report], 0)

    # 7b: dice-only off-band mass strictly exceeds dice+ace
    off_dice, total_dice = _off_band_mass(harness_runs["reports"]["dice"], 1)
    off_both, total_both = _off_band_mass(
        harness_runs["reports"]["dice+ace"], 1
    )
    _criterion(
        7, "dataset histogram",
        off_cal == 0 and off_dice > off_both,
        f"calibrated set off-band mass {off_cal}/{total_cal} (require 0); "
        f"off-band mass dice {off_dice}/{total_dice} vs dice+ace "
        f"{off_both}/{total_both} (require strictly greater)",
    )
