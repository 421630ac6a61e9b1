import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parkcp.errors import ConfigError, TraceParseError, TraceValidationError
from parkcp.model import MotionKind, Position2D, distance
from parkcp.scenario import (
    ChokePoint,
    ScenarioConfig,
    circuit_length,
    gen_circuit,
    gen_town,
    parse_trace,
    serialize_trace,
)

SQUARE = (
    Position2D(0.0, 0.0),
    Position2D(100.0, 0.0),
    Position2D(100.0, 100.0),
    Position2D(0.0, 100.0),
)


# ---------------------------------------------------------------------------
# Trace parsing


def test_parse_two_rows_one_vehicle():
    text = "t,id,x,y,vx,vy,kind\n0,7,0.0,0.0,1.0,0.0,moving\n1,7,1.0,0.0,1.0,0.0,moving\n"
    records = parse_trace(text)
    assert len(records) == 1
    rec = records[0]
    assert rec.vehicle_id == 7
    assert len(rec.positions) == 2
    assert rec.kind is MotionKind.MOVING


def test_parse_header_only_gives_empty_list():
    assert parse_trace("t,id,x,y,vx,vy,kind\n") == []


def test_parse_rejects_parked_with_velocity():
    text = "t,id,x,y,vx,vy,kind\n0,3,1.0,2.0,5.0,0.0,parked\n"
    with pytest.raises(TraceValidationError, match="nonzero velocity"):
        parse_trace(text)


def test_parse_rejects_duplicate_step_id():
    text = (
        "t,id,x,y,vx,vy,kind\n"
        "0,1,0.0,0.0,0.0,0.0,moving\n"
        "0,1,1.0,0.0,0.0,0.0,moving\n"
    )
    with pytest.raises(TraceValidationError, match="duplicate"):
        parse_trace(text)


def test_parse_rejects_unsorted_rows():
    text = (
        "t,id,x,y,vx,vy,kind\n"
        "1,1,0.0,0.0,0.0,0.0,moving\n"
        "0,1,0.0,0.0,0.0,0.0,moving\n"
    )
    with pytest.raises(TraceValidationError, match="sorted"):
        parse_trace(text)


def test_parse_reports_line_number():
    text = "t,id,x,y,vx,vy,kind\n0,1,0.0,0.0,0.0,0.0,moving\n1,1,bogus,0.0,0.0,0.0,moving\n"
    with pytest.raises(TraceParseError, match="line 3"):
        parse_trace(text)


def test_parse_rejects_gap():
    text = (
        "t,id,x,y,vx,vy,kind\n"
        "0,1,0.0,0.0,0.0,0.0,moving\n"
        "2,1,0.0,0.0,0.0,0.0,moving\n"
    )
    with pytest.raises(TraceValidationError, match="gap"):
        parse_trace(text)


def test_parse_allows_comments_and_blank_lines():
    text = "# a comment\n\nt,id,x,y,vx,vy,kind\n# another\n0,1,0.5,0.25,0.0,0.0,moving\n"
    assert len(parse_trace(text)) == 1


def test_roundtrip_is_bit_exact_on_generated_scenarios():
    for kind, seed in (("circuit", 1), ("town", 2), ("town", 3)):
        cfg = ScenarioConfig(
            kind=kind, seed=seed, duration=30, n_moving=3, n_parked=4,
            n_entering=2, parked_spacing=60.0,
            choke_points=(ChokePoint(250.0, 200.0, 40.0, 5),),
        )
        records = gen_town(cfg) if kind == "town" else gen_circuit(cfg)
        assert parse_trace(serialize_trace(records)) == records


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**31), n_parked=st.integers(0, 5))
def test_roundtrip_property_town(seed, n_parked):
    cfg = ScenarioConfig(
        kind="town", seed=seed, duration=12, n_moving=2, n_parked=n_parked,
        n_entering=1,
    )
    records = gen_town(cfg)
    assert parse_trace(serialize_trace(records)) == records


# ---------------------------------------------------------------------------
# Circuit generation


def test_circuit_no_parked_leaves_only_target():
    cfg = ScenarioConfig(kind="circuit", duration=10, n_parked=0)
    records = gen_circuit(cfg)
    assert len(records) == 1
    assert records[0].kind is MotionKind.MOVING


def test_circuit_parked_stations_evenly_spaced():
    # 400 m square, 10 cars every 40 m: stations derived by hand from the
    # arc-length parameterization, offset 5 m along the inward (left) normal.
    cfg = ScenarioConfig(
        kind="circuit", duration=5, n_parked=10, parked_spacing=40.0,
        parked_offset=5.0, circuit=SQUARE,
    )
    records = gen_circuit(cfg)
    parked = [r for r in records if r.kind is MotionKind.PARKED]
    assert len(parked) == 10
    expected = [
        Position2D(0.0, 5.0),
        Position2D(40.0, 5.0),
        Position2D(80.0, 5.0),
        Position2D(95.0, 20.0),
        Position2D(95.0, 60.0),
        Position2D(95.0, 100.0),
        Position2D(60.0, 95.0),
        Position2D(20.0, 95.0),
        Position2D(5.0, 80.0),
        Position2D(5.0, 40.0),
    ]
    for rec, want in zip(parked, expected):
        got = rec.positions[0]
        assert got.x == pytest.approx(want.x, abs=1e-9)
        assert got.y == pytest.approx(want.y, abs=1e-9)


def test_circuit_parked_within_15m_of_polyline():
    cfg = ScenarioConfig(kind="circuit", duration=5, n_parked=8, parked_spacing=50.0,
                         parked_offset=14.0, circuit=SQUARE)
    for rec in gen_circuit(cfg):
        if rec.kind is MotionKind.PARKED:
            # distance to the nearest square edge equals the offset here
            p = rec.positions[0]
            edge_gap = min(abs(p.x), abs(p.y), abs(100 - p.x), abs(100 - p.y))
            assert edge_gap <= 15.0 + 1e-9


def test_circuit_spacing_longer_than_loop_is_config_error():
    cfg = ScenarioConfig(kind="circuit", duration=5, n_parked=3, parked_spacing=1000.0,
                         circuit=SQUARE)
    with pytest.raises(ConfigError, match="spacing"):
        gen_circuit(cfg)


def test_circuit_deterministic():
    cfg = ScenarioConfig(kind="circuit", duration=50, n_parked=6, seed=11)
    assert gen_circuit(cfg) == gen_circuit(cfg)


def test_circuit_target_speed_and_exact_consistency():
    cfg = ScenarioConfig(kind="circuit", duration=40, n_parked=0, speed=10.0,
                         circuit=SQUARE)
    target = gen_circuit(cfg)[0]
    target.validate(cfg.step_seconds, tolerance=0.0)  # exact, not approximate
    for i in range(len(target.positions) - 1):
        p, q = target.positions[i], target.positions[i + 1]
        assert distance(p, q) == pytest.approx(10.0, abs=1e-6)
    # bit-exact integration invariant
    for i in range(len(target.positions) - 1):
        p, v, q = target.positions[i], target.velocities[i], target.positions[i + 1]
        assert q.x == p.x + cfg.step_seconds * v.vx
        assert q.y == p.y + cfg.step_seconds * v.vy


def test_circuit_length_helper():
    assert circuit_length(SQUARE) == pytest.approx(400.0)


# ---------------------------------------------------------------------------
# Town generation


def test_town_entry_schedule():
    cfg = ScenarioConfig(
        kind="town", duration=400, n_moving=0, n_parked=0,
        n_entering=95, entry_interval=4,
    )
    records = gen_town(cfg)
    assert len(records) == 95
    starts = sorted(r.start_step for r in records)
    assert starts == [4 * k for k in range(95)]
    assert starts[-1] == 376


def test_town_parked_only():
    cfg = ScenarioConfig(kind="town", duration=10, n_moving=0, n_entering=0, n_parked=5)
    records = gen_town(cfg)
    assert len(records) == 5
    assert all(r.kind is MotionKind.PARKED for r in records)


def test_town_deterministic():
    cfg = ScenarioConfig(kind="town", seed=9, duration=25, n_moving=3, n_parked=5,
                         n_entering=2)
    assert gen_town(cfg) == gen_town(cfg)


def test_town_parked_at_least_one_meter_apart():
    cfg = ScenarioConfig(kind="town", seed=4, duration=10, n_moving=2, n_parked=20)
    parked = [r.positions[0] for r in gen_town(cfg) if r.kind is MotionKind.PARKED]
    for i in range(len(parked)):
        for j in range(i + 1, len(parked)):
            assert distance(parked[i], parked[j]) >= 1.0


def test_town_infeasible_parked_density():
    cfg = ScenarioConfig(
        kind="town", seed=0, duration=5, n_moving=0, n_entering=0,
        n_parked=200, area=(0.0, 0.0, 8.0, 8.0),
    )
    with pytest.raises(ConfigError, match="density"):
        gen_town(cfg)


def test_town_choke_point_induces_queued_halt():
    cfg = ScenarioConfig(
        kind="town", seed=13, duration=30, n_moving=4, n_parked=0,
        choke_points=(ChokePoint(250.0, 200.0, 10_000.0, 6),),
    )
    records = gen_town(cfg)
    queued = [r for r in records if r.kind is MotionKind.QUEUED]
    assert queued, "huge choke region must capture at least one walker"
    for rec in queued:
        halts = [v for v in rec.velocities if v.vx == 0.0 and v.vy == 0.0]
        assert len(halts) >= 6
        rec.validate(cfg.step_seconds, tolerance=0.0)


def test_town_trajectories_exactly_consistent():
    cfg = ScenarioConfig(kind="town", seed=21, duration=20, n_moving=3, n_parked=2,
                         n_entering=2)
    for rec in gen_town(cfg):
        rec.validate(cfg.step_seconds, tolerance=0.0)


def test_degenerate_area_rejected():
    cfg = ScenarioConfig(kind="town", area=(0.0, 0.0, 0.0, 100.0))
    with pytest.raises(ConfigError, match="degenerate"):
        gen_town(cfg)
