import pytest
from hypothesis import given, strategies as st

from voxwofe.boreholes import BoreholeSet, Collar, IntervalLog, desurvey, parse_boreholes, split_interval
from voxwofe.errors import BoreholeDataError

COLLARS = "hole_id,x,y,z,total_depth\nBH1,100,200,1000,50\n"


def test_single_collar_single_interval():
    holes = parse_boreholes(COLLARS, ["hole_id,from,to,attribute,code\nBH1,0,10,lithology,andesite\n"])
    assert len(holes) == 1
    assert holes.intervals == [IntervalLog("BH1", 0.0, 10.0, "lithology", "andesite")]


def test_unknown_hole_is_reported_with_row():
    with pytest.raises(BoreholeDataError) as err:
        parse_boreholes(COLLARS, ["hole_id,from,to,attribute,code\nBH1,0,10,lithology,a\nBH999,0,10,lithology,a\n"])
    assert err.value.issues == [("intervals[0]", 2, "unknown hole_id 'BH999'")]


@pytest.mark.parametrize("body, reason", [
    ("BH1,10,10,Cu,0.5,%", "from 10.0 >= to 10.0"),
    ("BH1,0,10,Cu,abc,%", "value 'abc' is not numeric"),
    ("BH1,0,10,Cu,-1,%", "negative concentration"),
    ("BH1,0,10,Cu,1,ppb", "unit 'ppb'"),
    ("BH1,40,60,Cu,1,%", "exceeds total_depth"),
])
def test_bad_assay_rows(body, reason):
    with pytest.raises(BoreholeDataError) as err:
        parse_boreholes(COLLARS, assay_tables=["hole_id,from,to,element,value,unit\n" + body + "\n"])
    assert reason in str(err.value)
    assert err.value.issues[0][1] == 1


def test_overlap_and_mixed_units_are_errors():
    table = "hole_id,from,to,element,value,unit\nBH1,0,10,Cu,1,%\nBH1,5,15,Cu,1,%\n"
    with pytest.raises(BoreholeDataError, match="overlaps"):
        parse_boreholes(COLLARS, assay_tables=[table])
    table = "hole_id,from,to,element,value,unit\nBH1,0,10,Cu,1,%\nBH1,10,20,Cu,1,ppm\n"
    with pytest.raises(BoreholeDataError, match="both"):
        parse_boreholes(COLLARS, assay_tables=[table])


def test_all_problems_reported_together():
    table = "hole_id,from,to,attribute,code\nBHX,0,10,lithology,a\nBH1,5,1,lithology,a\n"
    with pytest.raises(BoreholeDataError) as err:
        parse_boreholes(COLLARS + "BH1,0,0,0,10\n", [table])
    assert len(err.value.issues) == 3


def test_missing_column():
    with pytest.raises(BoreholeDataError, match="missing column"):
        parse_boreholes("hole_id,x,y,z\nBH1,0,0,0\n")


def test_zero_concentration_accepted():
    holes = parse_boreholes(COLLARS, assay_tables=["hole_id,from,to,element,value,unit\nBH1,0,10,Mo,0,ppm\n"])
    assert holes.intervals[0].value == 0.0


def _one_hole(start, end, value="x"):
    return BoreholeSet({"BH1": Collar("BH1", 100.0, 200.0, 1000.0, 100.0)},
                       [IntervalLog("BH1", start, end, "a", value)])


def test_desurvey_single_segment():
    [s] = desurvey(_one_hole(0, 10), 10)
    assert (s.x, s.y, s.z) == (100.0, 200.0, 995.0)


def test_desurvey_splits_with_short_tail():
    assert [s.z for s in desurvey(_one_hole(0, 25), 10)] == [995.0, 985.0, 977.5]


def test_desurvey_passes_categorical_value():
    assert {s.value for s in desurvey(_one_hole(0, 10, "potassic"), 10)} == {"potassic"}


def test_desurvey_rejects_bad_step():
    with pytest.raises(ValueError):
        desurvey(_one_hole(0, 10), 0)


@given(st.floats(0, 90), st.floats(0.1, 60), st.sampled_from([1.0, 2.5, 7.0, 10.0]))
def test_split_lengths_sum_to_interval(start, length, step):
    pieces = split_interval(start, start + length, step)
    assert sum(b - a for a, b in pieces) == pytest.approx(length, rel=1e-12, abs=1e-9)
    assert all(b - a <= step * (1 + 1e-9) for a, b in pieces)
    assert pieces[0][0] == start and pieces[-1][1] == start + length


def test_desurvey_is_independent_of_hole_order():
    rows = "hole_id,from,to,attribute,code\nBH1,0,20,lithology,a\nBH2,0,10,lithology,b\n"
    collars = COLLARS + "BH2,0,0,990,30\n"
    flipped = "hole_id,x,y,z,total_depth\nBH2,0,0,990,30\nBH1,100,200,1000,50\n"
    a = desurvey(parse_boreholes(collars, [rows]), 10)
    b = desurvey(parse_boreholes(flipped, ["hole_id,from,to,attribute,code\nBH2,0,10,lithology,b\n"
                                           "BH1,0,20,lithology,a\n"]), 10)
    assert a == b


def test_fixture_has_113_collars(fixture_dir):
    holes = parse_boreholes(fixture_dir / "collars.csv", [fixture_dir / "intervals.csv"],
                            [fixture_dir / "assays.csv"])
    assert len(holes) == 113
    assert holes.attributes() == ["Cu", "Fe", "Mo", "Zn", "alteration", "lithology", "rocktype"]
