"""Acceptance gates.

Each test locks in one externally checkable behavior of the finished
system, prints a single [ACCEPTANCE] line on success, and asserts its
own wall-clock budget. Tolerances are stated inline next to each
assertion.

The f1 cell for the (0.70, 0.67) operating point is recorded as a
strict expected failure: 2*0.70*0.67/1.37 = 0.68467..., which rounds to
0.68 at two decimals. The quoted 0.69 is only reachable by rounding the
already-rounded operands, which the library deliberately does not do.
"""

from __future__ import annotations

import random
import time

import numpy as np
import pytest

from cttriage.boxes import BoundingBox, Detection, containment_suppress
from cttriage.detect import DetectionSet, detect
from cttriage.lungs import LungMask, segment_lungs
from cttriage.metrics import (ConfusionMatrix, LabeledItem, SplitPlan,
                              precision_recall_f1, round_display, split,
                              wilson_interval)
from cttriage.phantom import detector_config, sample_corpus
from cttriage.pipeline import latency_summary
from cttriage.service.crypto import encrypt_blob
from cttriage.service.signing import sign_url
from cttriage.service.storage import FileStore
from cttriage.triage import classify, intensity
from oracles import (intensity_raster_oracle, percentile_nearest_rank,
                     suppress_oracle)
from test_service import (SECRET, build_service, create_patient, login,
                          stub_inference, upload_png)

from conftest import make_chest_png


def announce(name: str, detail: str) -> None:
    print(f"[ACCEPTANCE] {name}: PASS ({detail})")


def exact_ratio_matrix(p_num, p_den, r_den) -> ConfusionMatrix:
    """COVID precision p_num/p_den and recall p_num/r_den, both exact."""
    return ConfusionMatrix(tp=p_num, fp=p_den - p_num,
                           fn=r_den - p_num, tn=0)


F1_CELLS = [
    # (precision, recall) hit exactly by integer counts; expected 2-dp F1
    pytest.param(1581, 1860, 1700, 0.85, 0.93, 0.89, id="p85-r93"),
    pytest.param(36, 40, 45, 0.90, 0.80, 0.85, id="p90-r80"),
    pytest.param(1443, 1950, 1850, 0.74, 0.78, 0.76, id="p74-r78"),
    pytest.param(469, 670, 700, 0.70, 0.67, 0.69, id="p70-r67",
                 marks=pytest.mark.xfail(
                     strict=True,
                     reason="f1(0.70, 0.67) = 0.68467, which rounds to "
                            "0.68 at two decimals; 0.69 presumes "
                            "double rounding")),
]


class TestF1Cells:
    @pytest.mark.parametrize("tp,p_den,r_den,p_exp,r_exp,f1_exp", F1_CELLS)
    def test_two_decimal_f1(self, tp, p_den, r_den, p_exp, r_exp, f1_exp):
        start = time.perf_counter()
        cm = exact_ratio_matrix(tp, p_den, r_den)
        precision, recall, f1 = precision_recall_f1(cm, positive="COVID")
        assert round_display(precision) == p_exp       # exact at 2 dp
        assert round_display(recall) == r_exp
        assert round_display(f1) == f1_exp
        assert time.perf_counter() - start < 1.0
        announce("f1-cells",
                 f"P={p_exp} R={r_exp} -> F1={f1_exp} exact at 2 dp")


class TestWilsonAnchor:
    def test_recall_interval_anchor(self):
        start = time.perf_counter()
        ci = wilson_interval(0.93, 45, 1.96)
        assert round_display(ci.center) == 0.90        # exact at 2 dp
        assert round_display(ci.half_width) == 0.08
        # within +-0.01 of the quoted 0.89 +- 0.08 cell
        assert abs(ci.center - 0.89) <= 0.01
        assert abs(ci.half_width - 0.08) <= 0.01
        assert time.perf_counter() - start < 1.0
        announce("wilson-anchor",
                 f"center={ci.center:.4f} half={ci.half_width:.4f} "
                 "-> 0.90 +- 0.08 at 2 dp")


QUOTAS = {
    "COVID": {"train": 213, "val": 55, "test": 45},
    "NonCOVID": {"train": 256, "val": 45, "test": 55},
}


class TestQuotaSplit:
    def test_counts_exact_across_ten_seeds(self):
        items = ([LabeledItem(f"c{i:03d}", "COVID") for i in range(313)]
                 + [LabeledItem(f"n{i:03d}", "NonCOVID")
                    for i in range(356)])
        start = time.perf_counter()
        for seed in range(10):
            plan = SplitPlan(mode="quota", quotas=QUOTAS, seed=seed)
            first = split(items, plan)
            second = split(items, plan)
            for part_a, part_b in zip(first, second):
                assert [i.scan_id for i in part_a] \
                    == [i.scan_id for i in part_b]      # per-seed stable
            counts = {}
            seen = []
            for name, part in zip(("train", "val", "test"), first):
                for cls in ("COVID", "NonCOVID"):
                    counts[(cls, name)] = sum(
                        i.true_class == cls for i in part)
                seen.extend(i.scan_id for i in part)
            assert counts[("COVID", "train")] == 213
            assert counts[("NonCOVID", "train")] == 256
            assert counts[("COVID", "val")] == 55
            assert counts[("NonCOVID", "val")] == 45
            assert counts[("COVID", "test")] == 45
            assert counts[("NonCOVID", "test")] == 55
            assert len(seen) == 669                     # exhaustive
            assert len(set(seen)) == 669                # disjoint
        elapsed = time.perf_counter() - start
        assert elapsed < 1.0
        announce("quota-split",
                 f"213/256 55/45 45/55 exact, 10 seeds, {elapsed:.2f}s")


def random_detections(rng: random.Random, n: int, span: int = 48
                      ) -> list[Detection]:
    out = []
    for _ in range(n):
        x0 = rng.randrange(0, span - 1)
        y0 = rng.randrange(0, span - 1)
        x1 = rng.randrange(x0 + 1, span)
        y1 = rng.randrange(y0 + 1, span)
        score = rng.randrange(0, 11) / 10  # coarse scores force ties
        out.append(Detection(BoundingBox(x0, y0, x1, y1), score))
    return out


def nested_detections(rng: random.Random, depth: int) -> list[Detection]:
    """Concentric chain plus duplicates: the worst case for suppression."""
    x0, y0, x1, y1 = 0, 0, 4 + 2 * depth, 4 + 2 * depth
    out = []
    for level in range(depth):
        box = BoundingBox(x0 + level, y0 + level, x1 - level, y1 - level)
        out.append(Detection(box, rng.randrange(0, 11) / 10))
    out.extend(out[:2])                        # identical-box ties
    rng.shuffle(out)
    return out


class TestSuppressionOracle:
    def test_thousand_randomized_sets(self):
        rng = random.Random(20240822)
        start = time.perf_counter()
        checked = 0
        for i in range(1000):
            if i % 5 == 4:
                dets = nested_detections(rng, rng.randrange(2, 40))
            else:
                dets = random_detections(rng, rng.randrange(0, 101))
            assert containment_suppress(dets) == suppress_oracle(dets)
            checked += 1
        elapsed = time.perf_counter() - start
        assert checked == 1000
        assert elapsed < 30.0
        announce("suppression-oracle",
                 f"1000 sets (n<=100, nesting included) agree, "
                 f"{elapsed:.1f}s")


class TestIntensityOracle:
    def test_five_hundred_randomized_instances(self):
        rng = random.Random(1202)
        start = time.perf_counter()
        for _ in range(500):
            bits = np.zeros((64, 64), dtype=bool)
            for _ in range(rng.randrange(1, 4)):
                x0 = rng.randrange(0, 56)
                y0 = rng.randrange(0, 56)
                bits[y0:y0 + rng.randrange(4, 30),
                     x0:x0 + rng.randrange(4, 30)] = True
            mask = LungMask(bits)
            boxes = []
            for _ in range(rng.randrange(0, 9)):
                x0 = rng.randrange(0, 70)
                y0 = rng.randrange(0, 70)
                boxes.append(BoundingBox(x0, y0,
                                         x0 + rng.randrange(1, 30),
                                         y0 + rng.randrange(1, 30)))
            dets = DetectionSet(
                scan_id="acc", detector_id="acc",
                detections=[Detection(b, 1.0) for b in boxes])
            got = intensity(dets, mask, score_floor=0.0)
            want = intensity_raster_oracle(bits, boxes)
            assert abs(got - want) <= 1e-9              # stated tolerance
        elapsed = time.perf_counter() - start
        assert elapsed < 60.0
        announce("intensity-oracle",
                 f"500 instances within 1e-9, {elapsed:.1f}s")


class TestPhantomCorpus:
    def test_two_hundred_phantom_verdicts(self):
        start = time.perf_counter()
        corpus = sample_corpus(200, seed=20240822, size=512)
        full_matches = 0
        for ph in corpus:
            mask = segment_lungs(ph.image)
            cfg = detector_config(ph.spec)
            verdict = classify(detect(ph.image, mask, cfg), mask,
                               threshold=0.15, score_floor=cfg.score_floor)
            # presence agreement is mandatory for every case
            assert (verdict.covid_class == "COVID") \
                == (ph.expected_class == "COVID"), ph.image.source_id
            if (verdict.covid_class == ph.expected_class
                    and verdict.severity == ph.expected_severity):
                full_matches += 1
        elapsed = time.perf_counter() - start
        assert full_matches >= 190                      # >= 95% of 200
        assert elapsed < 300.0
        announce("phantom-corpus",
                 f"presence 200/200, full verdict {full_matches}/200, "
                 f"{elapsed:.0f}s")


ACCEPTANCE_SEED_ACCOUNTS = [
    {"email": "clinician-a@example.org", "password": "clinic-a-secret",
     "role": "clinician", "hospital_id": "hospital-a"},
    {"email": "admin-a@example.org", "password": "admin-a-secret",
     "role": "admin", "hospital_id": "hospital-a"},
    {"email": "clinician-b@example.org", "password": "clinic-b-secret",
     "role": "clinician", "hospital_id": "hospital-b"},
    {"email": "admin-b@example.org", "password": "admin-b-secret",
     "role": "admin", "hospital_id": "hospital-b"},
]


class TestServiceContract:
    def test_scoping_expiry_tampering_and_crash_consistency(self, tmp_path):
        start = time.perf_counter()
        svc = build_service(tmp_path, inference_fn=stub_inference,
                            seed_accounts=ACCEPTANCE_SEED_ACCOUNTS)
        tokens = {
            ("hospital-a", "clinician"): login(
                svc.client, "clinician-a@example.org", "clinic-a-secret"),
            ("hospital-a", "admin"): login(
                svc.client, "admin-a@example.org", "admin-a-secret"),
            ("hospital-b", "clinician"): login(
                svc.client, "clinician-b@example.org", "clinic-b-secret"),
            ("hospital-b", "admin"): login(
                svc.client, "admin-b@example.org", "admin-b-secret"),
        }

        # one patient + scan per hospital
        resources = {}
        for hospital in ("hospital-a", "hospital-b"):
            headers = tokens[(hospital, "clinician")]
            pat = create_patient(svc.client, headers, name=f"{hospital}-pat")
            scan = upload_png(svc.client, headers, pat, make_chest_png(64))
            resources[hospital] = (pat, scan)

        def routes(pat, scan):
            return [
                ("GET", f"/api/patients/{pat}", None),
                ("POST", f"/api/patients/{pat}/scans", make_chest_png(64)),
                ("POST", f"/api/scans/{scan}/inferences", None),
                ("GET", f"/api/patients/{pat}/inferences", None),
                ("GET", f"/api/patients/{pat}/report", None),
            ]

        checks = 0
        for owner, (pat, scan) in resources.items():
            for method, path, payload in routes(pat, scan):
                kwargs = {}
                if payload is not None:
                    kwargs["content"] = payload
                    kwargs["headers"] = {"Content-Type": "image/png"}
                # anonymous: rejected before anything happens
                resp = svc.client.request(method, path, **kwargs)
                assert resp.status_code == 401, (owner, method, path)
                checks += 1
                for (hospital, role), headers in tokens.items():
                    merged = dict(kwargs)
                    merged["headers"] = {**merged.get("headers", {}),
                                         **headers}
                    resp = svc.client.request(method, path, **merged)
                    if hospital == owner:
                        assert resp.status_code in (200, 201), \
                            (owner, hospital, role, method, path)
                    else:
                        assert resp.status_code == 404, \
                            (owner, hospital, role, method, path)
                    checks += 1

        # listing shows only the caller's hospital
        for hospital, (pat, _) in resources.items():
            for role in ("clinician", "admin"):
                listed = svc.client.get(
                    "/api/patients",
                    headers=tokens[(hospital, role)]).json()["patients"]
                assert [p["patient_id"] for p in listed] == [pat]

        # expired bearer token
        headers = login(svc.client, "clinician-a@example.org",
                        "clinic-a-secret")
        svc.clock.advance(svc.cfg.token_ttl_seconds + 1)
        assert svc.client.get("/api/patients",
                              headers=headers).status_code == 401

        # tampered and expired signed URLs against a real stored overlay
        blob = make_chest_png(32)
        svc.store.put_blob("overlays/acc.png", encrypt_blob(blob, SECRET))
        url = sign_url("overlays/acc.png",
                       svc.cfg.signed_url_ttl_seconds, SECRET,
                       now=svc.clock.now).to_url()
        assert svc.client.get(url).status_code == 200
        tampered = url[:-1] + ("0" if url[-1] != "0" else "1")
        assert svc.client.get(tampered).status_code == 403
        svc.clock.advance(svc.cfg.signed_url_ttl_seconds + 1)
        assert svc.client.get(url).status_code == 403

        # 100 interrupted writes leave no torn record
        torn_checked = self._crash_consistency(tmp_path / "crash-store")

        elapsed = time.perf_counter() - start
        assert elapsed < 300.0
        announce("service-contract",
                 f"{checks} matrix checks, expiry+tamper rejected, "
                 f"{torn_checked} interrupted writes clean, {elapsed:.0f}s")

    @staticmethod
    def _crash_consistency(root) -> int:
        import json as json_mod
        import os

        store = FileStore(root)
        rng = random.Random(77)
        real_replace = os.replace
        real_fsync = os.fsync
        fail_at = {"point": None}

        def replace(src, dst, *args, **kwargs):
            if fail_at["point"] == "replace" \
                    and str(dst).startswith(str(store.root)):
                raise OSError("interrupted")
            return real_replace(src, dst, *args, **kwargs)

        def fsync(fd):
            if fail_at["point"] == "fsync":
                raise OSError("interrupted")
            return real_fsync(fd)

        os.replace, os.fsync = replace, fsync
        committed = None
        try:
            for i in range(100):
                fail_at["point"] = rng.choice(
                    ["fsync", "replace", None])
                attempt = {"record_id": "rec-acc", "patient_id": "pat-acc",
                           "created_at": f"t{i:03d}", "status": "succeeded"}
                try:
                    store.put_record(attempt)
                    committed = attempt
                except OSError:
                    pass
                path = store.root / "records" / "rec-acc.json"
                if committed is None:
                    assert not path.exists()
                else:
                    assert json_mod.loads(path.read_bytes()) == committed
        finally:
            os.replace, os.fsync = real_replace, real_fsync
        return 100


class TestLatencyReporting:
    def test_summary_matches_sort_oracle(self):
        smoke = latency_summary([9040.0, 5360.0])
        assert smoke == {"mean": 7200.0, "min": 5360.0,
                         "max": 9040.0, "p95": 9040.0}

        rng = random.Random(4)
        for _ in range(50):
            values = [rng.uniform(1.0, 20_000.0)
                      for _ in range(rng.randrange(1, 200))]
            got = latency_summary(values)
            assert got["mean"] == pytest.approx(sum(values) / len(values),
                                                rel=1e-12)
            assert got["min"] == min(values)
            assert got["max"] == max(values)
            assert got["p95"] == percentile_nearest_rank(values, 0.95)
        announce("latency-reporting",
                 "smoke mean 7200 ms; 50 random summaries match the "
                 "sort oracle")
