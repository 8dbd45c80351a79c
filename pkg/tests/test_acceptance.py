"""Acceptance suite: one test per release criterion.

Each test prints an ``ACCEPTANCE <n> PASS`` line (run with ``pytest -s`` to
see them live).  Every experiment is seeded, so the measured numbers are
reproducible bit for bit.
"""

import math
import time

import numpy as np

from dcal import (
    CorrelatedBattery,
    Contaminated,
    DataPair,
    FeatureMatrix,
    NullBattery,
    OosScheme,
    OutlierKind,
    bh_adjust,
    dcal_in_sample_check,
    dcal_test,
    gen_pair,
    holm_adjust,
    loo_predictions,
    pcal_sellke,
    pearson,
    run_battery_experiment,
    run_oos_comparison,
    run_outlier_suite,
    screen,
)
from dcal.cli import main
from dcal.rng import Stream, derive

from conftest import ANSCOMBE, brute_bh, brute_holm, naive_loo

GOLDEN_DCAL = {
    "A": (0.62640580171924605, 0.039197094465228663),
    "B": (0.58890808206856622, 0.056618299218967159),
    "C": (0.40314503925340792, 0.21891156088566261),
}


def _report(num: int, ok: bool, detail: str) -> None:
    print(f"\nACCEPTANCE {num} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, f"criterion {num}: {detail}"


def test_criterion_01_anscombe_classical():
    started = time.perf_counter()
    stats = {name: pearson(DataPair(x, y)) for name, (x, y) in ANSCOMBE.items()}
    elapsed = time.perf_counter() - started
    ok = all(abs(s.r - 0.816) <= 0.002 for s in stats.values())
    ok &= all(abs(s.p - 0.0022) <= 0.0002 for s in stats.values())
    ok &= elapsed < 1.0
    detail = (
        "r=" + "/".join(f"{stats[k].r:.4f}" for k in "ABCD")
        + "  p=" + "/".join(f"{stats[k].p:.5f}" for k in "ABCD")
        + f"  ({elapsed * 1000:.0f} ms)"
    )
    _report(1, ok, detail)


def test_criterion_02_sellke_reproduction():
    value = pcal_sellke(0.00217)
    ok = abs(value - 0.035) <= 0.002
    _report(2, ok, f"pcal_sellke(0.00217) = {value:.5f} (target 0.035 +- 0.002)")


def test_criterion_03_anscombe_dcal_pattern():
    results = {name: dcal_test(DataPair(x, y)) for name, (x, y) in ANSCOMBE.items()}
    a, b, c, d = (results[k] for k in "ABCD")
    ok = a.p_dcal < 0.05
    ok &= 0.05 <= b.p_dcal < 0.1
    ok &= c.p_dcal >= 0.1
    ok &= a.r_dcal > b.r_dcal > c.r_dcal >= 0.0
    ok &= d.sign_flip_triggered and (d.r_dcal, d.p_dcal) == (0.0, 0.5)
    for name, (r_gold, p_gold) in GOLDEN_DCAL.items():
        ok &= abs(results[name].r_dcal - r_gold) <= 1e-9
        ok &= abs(results[name].p_dcal - p_gold) <= 1e-9
    detail = (
        f"p_dcal A/B/C = {a.p_dcal:.4f}/{b.p_dcal:.4f}/{c.p_dcal:.4f}, D flips; "
        "golden values match at 1e-9"
    )
    _report(3, ok, detail)


def test_criterion_04_loo_oracle_equivalence():
    started = time.perf_counter()
    worst = 0.0
    for n in (10, 50, 200):
        for k in range(100):
            pair = gen_pair(n, 0.3, derive(8801, n, k))
            fast = loo_predictions(pair.x, pair.y)
            naive = naive_loo(pair.x, pair.y)
            scale = max(1.0, float(np.abs(naive).max()))
            worst = max(worst, float(np.abs(fast - naive).max()) / scale)
    elapsed = time.perf_counter() - started
    ok = worst <= 1e-9 and elapsed < 5.0
    _report(4, ok, f"max relative gap {worst:.2e} over 300 pairs ({elapsed:.1f} s)")


def test_criterion_05_null_battery():
    started = time.perf_counter()
    design = NullBattery(m=1000, n=50, seed=20260401)
    report = run_battery_experiment(
        design,
        methods=["uncorrected", "holm", "perm_max", "dcal"],
        alpha=0.05,
        repetitions=60,
    )
    elapsed = time.perf_counter() - started
    fpr_unc = report.value("uncorrected", "fpr")
    fpr_dcal = report.value("dcal", "fpr")
    fwer_holm = report.value("holm", "fwer")
    fwer_pmax = report.value("perm_max", "fwer")
    ok = abs(fpr_unc - 0.05) <= 0.01
    ok &= fpr_dcal < 0.02 + 0.005  # stated bound plus Monte-Carlo slack
    ok &= fwer_holm <= 0.05
    ok &= fwer_pmax <= 0.05
    ok &= elapsed < 300.0
    detail = (
        f"FPR uncorrected {fpr_unc:.4f}, dcal {fpr_dcal:.4f}; "
        f"FWER holm {fwer_holm:.3f}, perm_max {fwer_pmax:.3f} ({elapsed:.0f} s)"
    )
    _report(5, ok, detail)


def test_criterion_06_power_battery():
    started = time.perf_counter()
    big = run_battery_experiment(
        CorrelatedBattery(m_true=100, m_null=900, rho=0.5, n=200, seed=20260402),
        methods=["dcal", "pcal_sellke", "bh"],
        alpha=0.05,
        repetitions=20,
    )
    found = {m: 100 * big.value(m, "sensitivity") for m in ("dcal", "pcal_sellke", "bh")}
    small = run_battery_experiment(
        CorrelatedBattery(m_true=100, m_null=900, rho=0.5, n=50, seed=20260403),
        methods=["holm", "perm_max", "bh"],
        alpha=0.05,
        repetitions=20,
    )
    sens_small = {m: small.value(m, "sensitivity") for m in ("holm", "perm_max", "bh")}
    elapsed = time.perf_counter() - started
    ok = all(v >= 95.0 for v in found.values())
    ok &= sens_small["holm"] < sens_small["bh"]
    ok &= sens_small["perm_max"] < sens_small["bh"]
    ok &= elapsed < 600.0
    detail = (
        "n=200 detections dcal/sellke/bh = "
        + "/".join(f"{found[m]:.1f}" for m in ("dcal", "pcal_sellke", "bh"))
        + f"; n=50 sensitivity holm {sens_small['holm']:.2f} and perm_max "
        + f"{sens_small['perm_max']:.2f} < bh {sens_small['bh']:.2f} ({elapsed:.0f} s)"
    )
    _report(6, ok, detail)


def test_criterion_07_oos_scheme_ranking():
    design = NullBattery(m=100, n=50, seed=20260202)
    report = run_oos_comparison(
        design,
        schemes=[
            OosScheme.loo(),
            OosScheme.repeated_kfold(10, 10, 0),
            OosScheme.boot632(100, 0),
        ],
        alpha=0.05,
        repetitions=40,
    )
    fpr = {label: report.value(f"dcal-{label}", "fpr") for label in ("loo", "cv10x10", "boot632")}
    ok = fpr["cv10x10"] > fpr["loo"]
    ok &= abs(fpr["boot632"] - fpr["loo"]) <= 0.02
    detail = (
        f"null FPR loo {fpr['loo']:.4f} < cv10x10 {fpr['cv10x10']:.4f}; "
        f"boot632 {fpr['boot632']:.4f} within 2pp of loo"
    )
    _report(7, ok, detail)


def test_criterion_08_conservatism_ordering():
    p_raw, p_cal, p_dcal = [], [], []
    for k in range(500):
        res = dcal_test(gen_pair(50, 0.2, derive(8808, k)), fast=False)
        p_raw.append(res.p)
        p_cal.append(pcal_sellke(res.p))
        p_dcal.append(res.p_dcal)
    low_ok = np.mean(p_dcal) > np.mean(p_cal) > np.mean(p_raw)

    p_raw_hi, p_dcal_hi, r_dcal_hi = [], [], []
    for k in range(500):
        res = dcal_test(gen_pair(200, 0.8, derive(8809, k)), fast=False)
        p_raw_hi.append(res.p)
        p_dcal_hi.append(res.p_dcal)
        r_dcal_hi.append(abs(res.r_dcal))
    high_ok = abs(np.mean(p_dcal_hi) - np.mean(p_raw_hi)) < 0.01
    high_ok &= abs(np.mean(r_dcal_hi) - 0.8) < 0.05
    ok = low_ok and high_ok
    detail = (
        f"rho=0.2: mean p {np.mean(p_raw):.3f} < sellke {np.mean(p_cal):.3f} "
        f"< p_dcal {np.mean(p_dcal):.3f}; rho=0.8: |dp| = "
        f"{abs(np.mean(p_dcal_hi) - np.mean(p_raw_hi)):.2e}, "
        f"mean |r_dcal| = {np.mean(r_dcal_hi):.3f}"
    )
    _report(8, ok, detail)


def test_criterion_09_outlier_suite():
    univariate = [
        Contaminated(rho, OutlierKind("univariate"), 0.1, 100, 20260901)
        for rho in (0.3, 0.5)
    ]
    bivariate = [
        Contaminated(rho, OutlierKind("bivariate"), 0.1, 100, 20260902)
        for rho in (0.2, 0.3)
    ]
    report = run_outlier_suite(univariate + bivariate, repetitions=200)

    ok = True
    details = []
    for cell_design in univariate:
        cell = (
            f"kind=univariate,rho={cell_design.rho},fraction=0.1,n=100,mag=8.0"
        )
        est = {m: report.value(m, "mean_estimate", cell=cell) for m in ("pearson", "dcal", "skipped")}
        sens = {m: report.value(m, "sensitivity", cell=cell) for m in ("pearson", "dcal", "skipped")}
        ok &= est["skipped"] > est["pearson"] > est["dcal"]
        ok &= all(v < cell_design.rho for v in est.values())
        ok &= sens["skipped"] > sens["pearson"] > sens["dcal"]
        details.append(
            f"uni rho={cell_design.rho}: r {est['skipped']:.2f}>{est['pearson']:.2f}>{est['dcal']:.2f}"
        )
    for cell_design in bivariate:
        cell = (
            f"kind=bivariate,rho={cell_design.rho},fraction=0.1,n=100,mag=8.0"
        )
        est = {m: report.value(m, "mean_estimate", cell=cell) for m in ("pearson", "dcal", "skipped")}
        sens = {m: report.value(m, "sensitivity", cell=cell) for m in ("pearson", "dcal", "skipped")}
        ok &= est["pearson"] > cell_design.rho and est["dcal"] > cell_design.rho
        ok &= abs(est["skipped"] - cell_design.rho) <= 0.05
        ok &= sens["skipped"] < sens["pearson"] and sens["skipped"] < sens["dcal"]
        details.append(
            f"bi rho={cell_design.rho}: skipped r {est['skipped']:.2f}, "
            f"others {est['pearson']:.2f}/{est['dcal']:.2f}"
        )
    _report(9, ok, "; ".join(details))


def test_criterion_10_correction_oracles():
    ok = True
    for k in range(1000):
        stream = Stream(derive(8810, k))
        m = 1 + int(stream.uniforms(1)[0] * 40)
        p = stream.uniforms(m)
        holm = holm_adjust(p)
        bh = bh_adjust(p)
        ok &= np.array_equal(holm, brute_holm(p))
        ok &= np.array_equal(bh, brute_bh(p))
        ok &= np.all(holm >= bh)
        order = np.argsort(p, kind="stable")
        ok &= bool(np.all(np.diff(holm[order]) >= 0) and np.all(np.diff(bh[order]) >= 0))
        if not ok:
            break
    _report(10, ok, "holm/bh equal brute-force definitions on 1000 random vectors")


def _screening_matrix(seed: int) -> FeatureMatrix:
    n, m_true, m_null, rho = 200, 100, 900, 0.5
    y = Stream(derive(seed, 0)).normals(n)
    rows = [y]
    names = ["target"]
    mix = math.sqrt(1 - rho * rho)
    for j in range(m_true + m_null):
        g = Stream(derive(seed, j + 1)).normals(n)
        rows.append(rho * y + mix * g if j < m_true else g)
        names.append(f"f{j:04d}")
    return FeatureMatrix(
        feature_names=tuple(names),
        values=np.vstack(rows),
        sample_names=tuple(f"s{i}" for i in range(n)),
    )


def test_criterion_11_screening_nesting():
    started = time.perf_counter()
    size_ok = 0
    nested = 0
    runs = 20
    for k in range(runs):
        matrix = _screening_matrix(derive(8811, k))
        report = screen(matrix, "target", corrections=("holm", "bh"), fast=True)
        sets = report.significant_sets()
        if len(sets["holm"]) <= len(sets["dcal"]) <= len(sets["bh"]):
            size_ok += 1
        if sets["holm"] <= sets["dcal"] <= sets["bh"]:
            nested += 1
    elapsed = time.perf_counter() - started
    ok = size_ok >= 0.9 * runs
    detail = (
        f"|holm| <= |dcal| <= |bh| in {size_ok}/{runs} runs; "
        f"full set-nesting in {nested}/{runs} (measured) ({elapsed:.0f} s)"
    )
    _report(11, ok, detail)


def test_criterion_12_in_sample_degeneracy():
    worst = 0.0
    for k in range(100):
        pair = gen_pair(40, 0.35, derive(8812, k))
        worst = max(worst, abs(dcal_in_sample_check(pair) - pearson(pair).r))
    ok = worst <= 1e-10
    _report(12, ok, f"max |in-sample calibrated r - classical r| = {worst:.2e}")


def test_criterion_13_determinism(tmp_path):
    config = tmp_path / "battery.cfg"
    config.write_text(
        "design = correlated_battery\nm_true = 5\nm_null = 20\nrho = 0.5\n"
        "n = 40\nseed = 13\nrepetitions = 4\nmethods = uncorrected,holm,bh,dcal\n"
    )
    outputs = []
    for run, threads in (("a", "1"), ("b", "2"), ("c", "1")):
        out = tmp_path / f"sim_{run}"
        rc = main([
            "simulate", "--config", str(config), "--output", str(out),
            "--threads", threads,
        ])
        assert rc == 0
        outputs.append(((tmp_path / f"sim_{run}.csv").read_bytes(),
                        (tmp_path / f"sim_{run}.json").read_bytes()))
    sim_ok = outputs[0] == outputs[1] == outputs[2]

    matrix_path = tmp_path / "matrix.csv"
    matrix = _screening_matrix(derive(8813, 0))
    lines = ["id," + ",".join(matrix.sample_names)]
    for name, row in zip(matrix.feature_names[:60], matrix.values[:60]):
        lines.append(name + "," + ",".join(repr(float(v)) for v in row))
    matrix_path.write_text("\n".join(lines) + "\n")
    screens = []
    for run, threads in (("a", "2"), ("b", "1")):
        out = tmp_path / f"screen_{run}.csv"
        rc = main([
            "screen", "--matrix", str(matrix_path), "--target", "target",
            "--output", str(out), "--seed", "99", "--threads", threads,
            "--corrections", "holm,bh,perm_max",
        ])
        assert rc == 0
        screens.append(out.read_bytes())
    screen_ok = screens[0] == screens[1]
    ok = sim_ok and screen_ok
    _report(13, ok, "simulate and screen reports byte-identical across reruns and thread counts")
