import io
import json
from fractions import Fraction as F

from drsys.engine import Dist, TailPolicy, iterate
from drsys.io import read_dist, read_table, table_to_str, to_jsonable, write_dist, write_json
from drsys.polymode import RationalPoly


def test_exact_dist_round_trip():
    d = Dist.from_masses({0: F(16, 25), 1: F(8, 25), 3: F(1, 25)})
    buf = io.StringIO()
    write_dist(d, buf, n=1, m=2)
    buf.seek(0)
    assert read_dist(buf) == d


def test_float_dist_round_trip_keeps_tail():
    d = iterate(Dist.from_masses({0: 0.5, 2: 0.5}), 2, 6, cap=20, policy=TailPolicy.LUMP_AT_CAP)[-1]
    buf = io.StringIO()
    write_dist(d, buf)
    buf.seek(0)
    back = read_dist(buf)
    assert back.lumped_tail == d.lumped_tail
    assert list(back.masses) == list(d.masses)


def test_table_has_meta_and_float_companion():
    text = table_to_str([{"n": 0, "L": F(-1, 2)}], ["n", "L"], meta={"seed": 3},
                        exact_columns=("L",))
    meta, rows = read_table(io.StringIO(text))
    assert meta == {"seed": "3"}
    assert rows == [{"n": "0", "L": "-1/2", "L_float": "-0.5"}]


def test_json_writes_rationals_as_strings():
    buf = io.StringIO()
    write_json({"x": F(1, 5), "p": RationalPoly.x(), "n": 3}, buf)
    obj = json.loads(buf.getvalue())
    assert obj["x"] == "1/5" and obj["n"] == 3
    assert RationalPoly.from_json(obj["p"]) == RationalPoly.x()


def test_to_jsonable_nested():
    assert to_jsonable({1: [F(1, 2), True]}) == {"1": ["1/2", True]}
