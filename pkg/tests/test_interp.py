import pytest
from hypothesis import given, settings, strategies as st

from loopfission.ast import Assign, Literal, OpApply, Parallel, Seq, Skip, VarRef
from loopfission.fission import FissionOptions, fission_program
from loopfission.fuzz import FuzzConfig, random_program
from loopfission.interp import State, differential_check, execute, wrap
from loopfission.parser import parse
from conftest import load

MAX, MIN = 2**63 - 1, -(2**63)


def run(src, **kw):
    return execute(parse(src, allow_parallel=True), **kw)


def value(src, name="x", **kw):
    r = run(src, **kw)
    assert r.ok, r.detail
    return r.state.value(name)


@pytest.mark.parametrize(
    "expr, expected",
    [
        ("7 / 2", 3), ("-7 / 2", -3), ("7 / -2", -3), ("-7 % 2", -1), ("7 % -2", 1),
        (f"{MAX} + 1", MIN), (f"{MIN} - 1", MAX), (f"{MIN} / -1", MIN), (f"-({MIN})", MIN),
        (f"{MAX} * 2", -2), ("3 < 4", 1), ("3 >= 4", 0), ("!0", 1), ("!7", 0),
        ("2 && 3", 1), ("0 || 0", 0), ("0 && 1 / 0", 0), ("1 || 1 / 0", 1),
    ],
)
def test_c_like_arithmetic(expr, expected):
    assert value(f"x = {expr}") == expected


def test_wrap():
    assert wrap(2**64 + 5) == 5 and wrap(2**63) == MIN and wrap(-1) == -1


@pytest.mark.parametrize(
    "src, kind",
    [
        ("x = 1 / 0", "division-by-zero"),
        ("x = 1 % 0", "division-by-zero"),
        ("t[-1] = 0", "negative-index"),
        ("x = t[0 - 2]", "negative-index"),
        ("t[0] = 1\nx = t", "kind-mismatch"),
        ("x = 1\nx[0] = 1", "kind-mismatch"),
    ],
)
def test_runtime_errors(src, kind):
    r = run(src)
    assert r.status == "runtime-error" and r.detail.startswith(kind)


def test_fuel_is_reported():
    r = run("while 1 do { x = x + 1 }", fuel=50)
    assert r.status == "fuel-exhausted"
    assert r.state.value("x") == 50
    with pytest.raises(ValueError):
        run("skip", fuel=0)


def test_skip_leaves_state_alone():
    s = State({"a": 4}, {"t": {1: 2}})
    r = execute(Skip(), s)
    assert r.state == s and r.log == []


def test_defaults_and_sparse_arrays():
    r = run("t[5] = 0\nx = y + t[3]")
    assert r.state.value("x") == 0
    assert r.state.value("t") == ()  # zero cells are not observable


def test_use_logs_values_in_order():
    r = run("a = 1\nuse(a)\nt[2] = 9\na = 2\nuse(a, t)")
    assert [(e.args, e.values) for e in r.log] == [(("a",), (1,)), (("a", "t"), (2, ((2, 9),)))]


def test_parallel_branches_agreeing():
    p = Seq((Parallel((Assign("i", OpApply("+", (VarRef("i"), Literal(1)))),) * 2),))
    r = execute(p)
    assert r.ok and r.state.value("i") == 1


def test_parallel_disjoint_writes_and_private_reads():
    r = run("a = 1\nparallel { a = 5; b = a } { c = a; use(c) } { use(a) }")
    assert r.ok
    assert (r.state.value("a"), r.state.value("b"), r.state.value("c")) == (5, 5, 1)
    assert [e.values for e in r.log] == [(1,), (1,)]


def test_parallel_race():
    r = run("parallel { a = 1 } { a = 2 }")
    assert r.status == "runtime-error" and "parallel-race" in r.detail


def test_watch_sees_each_loop_execution():
    p = parse("k = 0\nwhile k != 3 do { j = 0\nwhile j != 2 do { j = j + 1 }\nk = k + 1 }")
    inner = p.items[1].body.items[1]
    seen = []
    execute(p, watch={id(inner): lambda loop, pre, post: seen.append((pre.value("j"), post.value("j")))})
    assert seen == [(0, 2)] * 3


def fig4_by_hand(j):
    # direct transcription of the running example
    x1, i, y1, y2, x2 = 1, 1, 0, 0, 0
    s, u, t = {}, {}, {}
    while i != j:
        x1 = wrap(x1 + y1 + x2 + i)
        y1 = wrap(y1 + i)
        y2 = wrap(y2 * y1)
        s[i] = x1
        x2 = wrap(x1 + s[i])
        u[i] = y2
        t[i] = wrap(y2 * y2)
        i += 1
    return x1, x2, y1, s


def test_running_example_against_hand_transcription():
    r = execute(load("fig4_small"))
    x1, x2, y1, s = fig4_by_hand(10)
    assert r.state.value("x1") == x1 and r.state.value("x2") == x2 and r.state.value("y1") == y1
    assert r.state.value("s") == tuple(sorted(s.items()))
    assert [e.values for e in r.log] == [(x1,)]


def test_differential_check_on_running_example():
    v = differential_check(load("fig4_small"))
    assert v.ok and v.split_loops == 1


def test_differential_check_unsplit_loop():
    v = differential_check(parse("i = 0\nwhile i < 5 do { s = s + i; i = i + 1 }"))
    assert v.ok and v.split_loops == 0


def test_differential_check_catches_output_dependence():
    # without the write-write rule the two writes of `a` land in separate loops
    p = parse("k = 0\nwhile k != 2 do { a = 1; a = 2; k = k + 1 }")
    assert differential_check(p).ok
    bad = differential_check(p, FissionOptions(augment=False))
    assert not bad.ok and bad.kind == "parallel-race" and bad.mode == "par"
    assert bad.to_dict()["ok"] is False
    assert "FAIL parallel-race" in str(bad)


def test_differential_check_with_initial_state():
    s = State({"y1": 3, "y2": 2})
    assert differential_check(load("fig4_small"), state=s).ok


def test_failing_programs_compare_statuses():
    v = differential_check(parse("k = 0\nwhile k != 3 do { a = 1 / (k - 1); b = 2; k = k + 1 }"))
    assert v.ok and "runtime-error" in v.detail


config = FuzzConfig()


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_interpreter_is_deterministic(seed):
    p = random_program(seed, config)
    assert execute(p, fuel=config.fuel()).to_json() == execute(p, fuel=config.fuel()).to_json()


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_seq_and_par_agree_and_never_race(seed):
    p = random_program(seed, config)
    par, _ = fission_program(p, FissionOptions(mode="par"))
    seq, _ = fission_program(p, FissionOptions(mode="seq"))
    a, b = execute(par, fuel=config.fuel()), execute(seq, fuel=config.fuel())
    assert a.ok, a.detail
    assert b.ok, b.detail
    assert a.log == b.log
    assert all(a.state.value(v) == b.state.value(v) for v in set(a.state.names()) & set(b.state.names()))


def test_run_result_json_shape():
    import json

    doc = json.loads(run("t[1] = 2\nuse(t)").to_json())
    assert doc["status"] == "completed"
    assert doc["state"] == {"t": {"1": 2}}
    assert doc["log"] == [{"args": ["t"], "values": [[[1, 2]]]}]
