import json

import pytest

encsim = pytest.importorskip("encsim")


def test_trace_round_trip():
    records = [encsim.EncounterRecord("A", "B", 0, 60), encsim.EncounterRecord("A", "B", 120, 300)]
    trace = encsim.make_trace(records, 600)
    assert trace.horizon_s == 600
    assert sorted(trace.nodes) == ["A", "B"]
    text = encsim.write_encounter_csv(trace)
    back = encsim.parse_encounter_csv(text)
    assert encsim.write_encounter_csv(back) == text


def test_spectrum_finds_the_fundamental():
    records = [
        encsim.EncounterRecord("A", "B", day * 86400, day * 86400 + 3600)
        for day in range(0, 128, 8)
    ]
    trace = encsim.make_trace(records, 128 * 86400)
    series = encsim.bin_pair_series(trace, "A", "B", 86400)
    spectrum = encsim.dft(series)
    assert spectrum.n == 128
    peaks = encsim.detect_peaks(spectrum, encsim.PeakPolicy(2.0, 4))
    assert any(p.k == 16 for p in peaks.peaks)
    components = encsim.to_periods(peaks, spectrum.n, spectrum.bin_width_s)
    assert components[0].period_s == pytest.approx(8 * 86400)


SCENARIO = {
    "duration_s": 10.0,
    "seed": 7,
    "nodes": [
        {
            "id": "A",
            "profile": {"r": 1.0},
            "pos": [50.0, 50.0],
            "personality": {
                "node": "A",
                "drag": 0.0,
                "pairs": {
                    "B": {
                        "attract_gain": 0.0,
                        "repulse_gain": 0.0,
                        "intent_threshold": 1.0,
                        "refractory_s": 0.0,
                    }
                },
            },
        },
        {
            "id": "B",
            "profile": {"q": 1.0},
            "pos": [55.0, 50.0],
            "personality": {
                "node": "B",
                "drag": 0.0,
                "pairs": {
                    "A": {
                        "attract_gain": 0.0,
                        "repulse_gain": 0.0,
                        "intent_threshold": 1.0,
                        "refractory_s": 0.0,
                    }
                },
            },
        },
    ],
    "bundles": [
        {
            "id": "m1",
            "src": "A",
            "target_profile": {"q": 1.0},
            "mode": {"type": "targeted", "sigma": 0.8, "epsilon": 0.01},
            "created_s": 0.0,
        }
    ],
}


def test_scenario_runs_and_is_deterministic():
    cfg = encsim.load_sim_config(json.dumps(SCENARIO))
    first = encsim.run_scenario(cfg)
    second = encsim.run_scenario(cfg)
    assert first.metrics.delivered == 1
    assert first.metrics.delivery_ratio == 1.0
    assert first.logs.deliveries[0].node == "B"
    assert first.logs.messages_csv == second.logs.messages_csv
    assert first.logs.positions_csv == second.logs.positions_csv
    report = json.loads(encsim.metrics_json(first.metrics))
    assert report["delivered"] == 1


def test_config_errors_surface():
    broken = json.loads(json.dumps(SCENARIO))
    del broken["seed"]
    with pytest.raises(encsim.ConfigError):
        encsim.load_sim_config(json.dumps(broken))


def test_inference_places_contacts_in_range():
    trace = encsim.make_trace([encsim.EncounterRecord("A", "B", 0, 600)], 600)
    arena = encsim.Arena()
    cfg = encsim.InferConfig()
    cfg.slot_width_s = 60
    cfg.seed = 3
    positions = encsim.infer_plausible_positions(trace, arena, cfg)
    assert len(positions.positions) == 10
    for slot in positions.positions:
        a, b = slot
        assert ((a.x - b.x) ** 2 + (a.y - b.y) ** 2) ** 0.5 <= arena.range + 1e-9
