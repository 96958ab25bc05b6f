"""Text format round trips and failure diagnostics.

Round-trip laws use object equality: every float is rendered with %.17g, so a
write followed by a read must reproduce the value bit for bit.
"""

import random

import pytest

from cacheways.apportion import SystemConfig, replay_events
from cacheways.errors import SchemaError
from cacheways.formats import (
    fmt_float,
    read_alloc_log,
    read_attributes,
    read_config,
    read_curves,
    read_events,
    read_mix,
    read_model,
    read_nests,
    read_samples,
    write_alloc_log,
    write_attributes,
    write_config,
    write_curves,
    write_events,
    write_mix,
    write_model,
    write_nests,
    write_samples,
    write_table_csv,
)
from cacheways.loops import (
    Affine,
    ArrayDecl,
    Bound,
    FootprintValue,
    LoopLevel,
    LoopNest,
    MemoryAccess,
    ReuseClass,
    Statement,
)
from cacheways.sensitivity import ProbeAttributes, WayTimeCurve
from cacheways.timing import TimingModel, TrainingSample

from oracles import random_affine_nest


def test_fmt_float_round_trips_exactly():
    for x in (0.0, 1.0, 0.1, 1 / 3, 1234.5678901234567, 1e-300, 6.02e23):
        assert float(fmt_float(x)) == x


def write_text(tmp_path, name, body):
    p = tmp_path / name
    p.write_text(body, encoding="utf-8")
    return str(p)


# -- header and comments ------------------------------------------------------

def test_missing_format_version(tmp_path):
    p = write_text(tmp_path, "x.txt", "curve a\nend\n")
    with pytest.raises(SchemaError, match="format-version"):
        read_curves(p)


def test_wrong_format_version(tmp_path):
    p = write_text(tmp_path, "x.txt", "format-version 99\ncurve a\nend\n")
    with pytest.raises(SchemaError, match="format-version"):
        read_curves(p)


def test_empty_file(tmp_path):
    p = write_text(tmp_path, "x.txt", "# nothing but comments\n\n")
    with pytest.raises(SchemaError, match="empty"):
        read_curves(p)


def test_comments_and_blanks_ignored(tmp_path):
    body = (
        "format-version 1\n"
        "\n"
        "# a full-line comment\n"
        "curve a  # trailing comment\n"
        "point 2 100\n"
        "end\n"
    )
    curves = read_curves(write_text(tmp_path, "c.txt", body))
    assert curves["a"].points == ((2, 100.0),)


def test_error_messages_carry_path_and_line(tmp_path):
    p = write_text(
        tmp_path, "bad.txt", "format-version 1\ncurve a\nwobble 1 2\n"
    )
    with pytest.raises(SchemaError, match=r"bad\.txt:3: unknown keyword"):
        read_curves(p)


# -- loop nests ---------------------------------------------------------------

def hand_nest():
    return LoopNest(
        name="edge",
        loops=(
            LoopLevel("i", Bound(10)),
            LoopLevel("j", Bound(7, estimated=True)),
        ),
        statements=(
            Statement(
                (
                    MemoryAccess("A", 8, Affine(5, (("i", -2),)), "read"),
                    MemoryAccess("A", 8, Affine(0, ()), "write"),
                ),
                1,
            ),
            Statement(
                (
                    MemoryAccess("B", 4, Affine(1, (("i", 4), ("j", 1))), "read"),
                    MemoryAccess("C", 2, None, "read"),
                ),
                2,
            ),
        ),
        arrays=(ArrayDecl("C", 1000, 2),),
    )


def test_nests_round_trip_hand_case(tmp_path):
    path = str(tmp_path / "nests.txt")
    write_nests([hand_nest()], path)
    assert read_nests(path) == [hand_nest()]


def test_nests_round_trip_randomized(tmp_path):
    rng = random.Random(7)
    nests = [random_affine_nest(rng, "n%d" % k) for k in range(12)]
    path = str(tmp_path / "nests.txt")
    write_nests(nests, path)
    assert read_nests(path) == nests


def test_nests_errors(tmp_path):
    with pytest.raises(SchemaError, match="outside a nest"):
        read_nests(write_text(tmp_path, "a.txt", "format-version 1\nloop i 5\n"))
    with pytest.raises(SchemaError, match="not closed"):
        read_nests(write_text(tmp_path, "b.txt", "format-version 1\nnest x\nloop i 5\n"))
    with pytest.raises(SchemaError, match="access outside a stmt"):
        read_nests(
            write_text(
                tmp_path,
                "c.txt",
                "format-version 1\nnest x\nloop i 5\naccess A read 8 0 i 1\nend\n",
            )
        )
    with pytest.raises(SchemaError, match="no loops"):
        read_nests(write_text(tmp_path, "d.txt", "format-version 1\nnest x\nend\n"))


# -- curves -------------------------------------------------------------------

def test_curves_round_trip(tmp_path):
    curves = {
        "steep": WayTimeCurve.from_dict({2: 1234.5678901234567, 3: 100.0, 7: 99.5}),
        "flat": WayTimeCurve.from_dict({2: 0.1}),
    }
    path = str(tmp_path / "curves.txt")
    write_curves(curves, path)
    assert read_curves(path) == curves


def test_curves_errors(tmp_path):
    with pytest.raises(SchemaError, match="duplicate curve"):
        read_curves(
            write_text(
                tmp_path,
                "a.txt",
                "format-version 1\ncurve a\npoint 2 1\nend\ncurve a\npoint 2 1\nend\n",
            )
        )
    with pytest.raises(SchemaError, match="point outside"):
        read_curves(write_text(tmp_path, "b.txt", "format-version 1\npoint 2 1\n"))
    with pytest.raises(SchemaError, match="not closed"):
        read_curves(write_text(tmp_path, "c.txt", "format-version 1\ncurve a\npoint 2 1\n"))
    # structurally bad curve is reported at its 'end' line
    with pytest.raises(SchemaError, match=r":4: curve 'a'"):
        read_curves(
            write_text(
                tmp_path,
                "d.txt",
                "format-version 1\ncurve a\npoint 3 1\nend\n",
            )
        )


# -- attributes ---------------------------------------------------------------

def test_attributes_round_trip(tmp_path):
    attrs = {
        "ph0": ProbeAttributes(
            phase_id="ph0",
            footprint=FootprintValue(4096, 64, True),
            reuse=ReuseClass.REUSE,
            alpha=0.30000000000000004,
            max_ways=5,
            timing=TimingModel((1.5, 2.25e-7), 0.001953125),
            fixed_ns=None,
        ),
        "ph1": ProbeAttributes(
            phase_id="ph1",
            footprint=FootprintValue(123, 2, False),
            reuse=ReuseClass.STREAM,
            alpha=0.0,
            max_ways=2,
            timing=None,
            fixed_ns=77.7,
        ),
    }
    path = str(tmp_path / "attrs.txt")
    write_attributes(attrs, path)
    assert read_attributes(path) == attrs


def test_attributes_errors(tmp_path):
    with pytest.raises(SchemaError, match="missing reuse"):
        read_attributes(
            write_text(
                tmp_path,
                "a.txt",
                "format-version 1\nattrs p\nfootprint 1 1 1\nalpha 0\nmax-ways 2\nend\n",
            )
        )
    with pytest.raises(SchemaError, match="duplicate attrs"):
        read_attributes(
            write_text(
                tmp_path,
                "b.txt",
                "format-version 1\n"
                "attrs p\nfootprint 1 1 1\nreuse stream\nalpha 0\nmax-ways 2\nend\n"
                "attrs p\nfootprint 1 1 1\nreuse stream\nalpha 0\nmax-ways 2\nend\n",
            )
        )
    with pytest.raises(SchemaError, match="not closed"):
        read_attributes(write_text(tmp_path, "c.txt", "format-version 1\nattrs p\n"))


# -- timing samples and models --------------------------------------------------

def test_samples_round_trip(tmp_path):
    samples = [
        TrainingSample((10.0, 20.0), 123.456),
        TrainingSample((1.5, 2.5), 0.25),
    ]
    path = str(tmp_path / "samples.txt")
    write_samples(samples, path)
    assert read_samples(path) == samples


def test_samples_arity_mismatch(tmp_path):
    body = "format-version 1\nsample 1 2 99\nsample 1 99\n"
    with pytest.raises(SchemaError, match="arity"):
        read_samples(write_text(tmp_path, "s.txt", body))


def test_model_round_trip(tmp_path):
    model = TimingModel((3.5, 0.125, 2e-9), 1e-06)
    path = str(tmp_path / "model.txt")
    write_model(model, path)
    assert read_model(path) == model


def test_model_requires_both_lines(tmp_path):
    with pytest.raises(SchemaError, match="residual and coefficients"):
        read_model(write_text(tmp_path, "m.txt", "format-version 1\nresidual 0\n"))


# -- config ---------------------------------------------------------------------

def test_config_round_trip(tmp_path):
    cfg = SystemConfig(ways_per_socket=12, dm_penalty=1.5, sockets=1)
    path = str(tmp_path / "cfg.txt")
    write_config(cfg, path)
    assert read_config(path) == cfg
    # defaults are not written out
    text = open(path, encoding="utf-8").read()
    assert "gfactor" not in text


def test_config_errors(tmp_path):
    with pytest.raises(SchemaError, match="unknown config key"):
        read_config(write_text(tmp_path, "a.txt", "format-version 1\nconfig turbo 9\n"))
    with pytest.raises(SchemaError, match="bad value"):
        read_config(
            write_text(tmp_path, "b.txt", "format-version 1\nconfig sockets lots\n")
        )


# -- mixes -----------------------------------------------------------------------

MIX_TEXT = """format-version 1
mix demo medium
config ways_per_socket 12
config dm_penalty 1.5
process 0
start 250
alpha 3.5
max-ways 6
unmixed-ns 12345.5
phase warm 2 reuse 4194304
fixed-ns 1000
point 2 400
point 3 200
point 12 200
phase cruise 1 stream 20971520
point 2 100
process 1
phase only 1 reuse 1048576
point 2 50
end
"""


def test_mix_read_then_round_trip(tmp_path):
    src = write_text(tmp_path, "demo.mix", MIX_TEXT)
    m1 = read_mix(src)
    out = str(tmp_path / "again.mix")
    write_mix(m1, out)
    m2 = read_mix(out)
    assert m1 == m2


def test_mix_derives_phase_sensitivity(tmp_path):
    m = read_mix(write_text(tmp_path, "demo.mix", MIX_TEXT))
    assert m.name == "demo" and m.category == "medium"
    assert m.config_overrides == {"ways_per_socket": 12, "dm_penalty": 1.5}
    p0 = m.processes[0]
    assert (p0.start_ns, p0.alpha, p0.max_ways, p0.unmixed_ns) == (
        250.0, 3.5, 6, 12345.5,
    )
    warm, cruise = p0.phases
    # phase-level pair comes from the phase curve, not the process override
    assert warm.attrs.max_ways == 3
    assert warm.attrs.alpha == 200.0
    assert warm.attrs.fixed_ns == 1000.0
    # no fixed-ns: predicted time defaults to the full-width curve value
    assert cruise.attrs.fixed_ns == 100.0
    assert cruise.attrs.reuse is ReuseClass.STREAM
    assert m.processes[1].phases[0].attrs.footprint.bytes == 1048576


def test_mix_errors(tmp_path):
    with pytest.raises(SchemaError, match="not closed"):
        read_mix(write_text(tmp_path, "a.mix", "format-version 1\nmix m light\nprocess 0\nphase p 1 reuse 1\npoint 2 1\n"))
    with pytest.raises(SchemaError, match="content after 'end'"):
        read_mix(
            write_text(
                tmp_path,
                "b.mix",
                "format-version 1\nmix m light\nprocess 0\nphase p 1 reuse 1\npoint 2 1\nend\nprocess 1\n",
            )
        )
    with pytest.raises(SchemaError, match="no curve points"):
        read_mix(
            write_text(
                tmp_path,
                "c.mix",
                "format-version 1\nmix m light\nprocess 0\nphase p 1 reuse 1\nend\n",
            )
        )
    with pytest.raises(SchemaError, match="must precede"):
        read_mix(
            write_text(
                tmp_path,
                "d.mix",
                "format-version 1\nmix m light\nprocess 0\nconfig sockets 1\nphase p 1 reuse 1\npoint 2 1\nend\n",
            )
        )
    with pytest.raises(SchemaError, match="expected: mix"):
        read_mix(write_text(tmp_path, "e.mix", "format-version 1\nblend m light\n"))


# -- events ----------------------------------------------------------------------

EVENTS_TEXT = """format-version 1
config sockets 1
ipca 0 0 2.5 4 4194304 reuse 1000000
ipca 0 1 0 2 20971520 stream 500000
pcca 50.5 0 8388608 reuse 250000
release 100 1
"""


def test_events_round_trip(tmp_path):
    src = write_text(tmp_path, "t.events", EVENTS_TEXT)
    ev1, cfg1 = read_events(src)
    out = str(tmp_path / "again.events")
    write_events(ev1, out, cfg1)
    ev2, cfg2 = read_events(out)
    assert ev1 == ev2
    assert cfg1 == cfg2
    assert cfg1.sockets == 1


def test_events_pcca_inherits_admission_sensitivity(tmp_path):
    ev, _ = read_events(write_text(tmp_path, "t.events", EVENTS_TEXT))
    kind, t, pid, attrs, pred = ev[2]
    assert (kind, t, pid, pred) == ("pcca", 50.5, 0, 250000.0)
    assert attrs.alpha == 2.5
    assert attrs.max_ways == 4
    assert attrs.footprint.bytes == 8388608


def test_events_errors(tmp_path):
    with pytest.raises(SchemaError, match="ipca takes"):
        read_events(write_text(tmp_path, "a.ev", "format-version 1\nipca 0 0\n"))
    with pytest.raises(SchemaError, match="stream|reuse"):
        read_events(
            write_text(
                tmp_path, "b.ev", "format-version 1\nipca 0 0 1 2 64 sideways 1\n"
            )
        )
    with pytest.raises(SchemaError, match="must precede"):
        read_events(
            write_text(
                tmp_path,
                "c.ev",
                "format-version 1\nrelease 0 0\nconfig sockets 1\n",
            )
        )
    with pytest.raises(SchemaError, match="unknown keyword"):
        read_events(write_text(tmp_path, "d.ev", "format-version 1\nfoo 1 2\n"))


# -- allocation log ----------------------------------------------------------------

def test_alloc_log_round_trip(tmp_path):
    src = write_text(
        tmp_path,
        "t.events",
        "format-version 1\nconfig sockets 1\n"
        "ipca 0 0 2.5 4 4194304 reuse 1000000\n"
        "ipca 0 1 0 2 4194304 reuse 1000000\n"
        "pcca 50.5 0 8388608 reuse 250000\n"
        "release 100 1\n",
    )
    ev, cfg = read_events(src)
    ap = replay_events(ev, cfg)
    path = str(tmp_path / "log.csv")
    write_alloc_log(ap.records, path, cfg)
    back = read_alloc_log(path)
    assert len(back) == len(ap.records)
    for orig, rt in zip(ap.records, back):
        assert (rt.time_ns, rt.pid, rt.event) == (orig.time_ns, orig.pid, orig.event)
        assert (rt.socket, rt.clos, rt.bitmask) == (
            orig.socket, orig.clos, orig.bitmask,
        )
        assert rt.scenario == orig.scenario
        assert rt.satisfied == orig.satisfied


def test_alloc_log_errors(tmp_path):
    with pytest.raises(SchemaError, match="header"):
        read_alloc_log(write_text(tmp_path, "a.csv", "time,pid\n"))
    head = "timestamp,pid,event,socket,clos,bitmask,scenario,satisfied\n"
    with pytest.raises(SchemaError, match="expected 8 columns"):
        read_alloc_log(write_text(tmp_path, "b.csv", head + "0,0,ipca\n"))
    with pytest.raises(SchemaError, match="unknown scenario"):
        read_alloc_log(
            write_text(
                tmp_path, "c.csv", head + "0,0,ipca,0,0,0x003,sideways,1\n"
            )
        )
    with pytest.raises(SchemaError, match=r"c?:\d+|invalid"):
        read_alloc_log(
            write_text(
                tmp_path, "d.csv", head + "0,zz,ipca,0,0,0x003,overlapping,1\n"
            )
        )


def test_table_csv_renders_floats_round_trip(tmp_path):
    path = str(tmp_path / "t.csv")
    write_table_csv(path, ("a", "b"), [(0.1, "x"), (1 / 3, 7)])
    lines = open(path, encoding="utf-8").read().splitlines()
    assert lines[0] == "# format-version 1"
    assert lines[1] == "a,b"
    assert float(lines[2].split(",")[0]) == 0.1
    assert float(lines[3].split(",")[0]) == 1 / 3
    assert lines[3].split(",")[1] == "7"
