import json
import subprocess
import sys

from gen import SAMPLES
from infrew.cli import main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    return code, capsys.readouterr().out.strip()


def s(name):
    return SAMPLES / name


def test_truncate_and_distance(capsys, tmp_path):
    p = tmp_path / "t.term"
    p.write_text("rec u. f(g(u))")
    assert run(capsys, "truncate", p, "--depth", "3") == (0, "f(g(f(*)))")
    q = tmp_path / "u.term"
    q.write_text("f(g(f(a)))")
    code, out = run(capsys, "distance", p, q, "--depth", "8", "--format", "json")
    assert code == 0 and json.loads(out) == {"distance": "1/8", "exact": True}
    code, out = run(capsys, "distance", p, p, "--depth", "4")
    assert code == 0 and out == "<=1/16"


def test_step_list_and_apply(capsys):
    assert run(capsys, "step", s("a.term"), "--system", s("intro.trs")) == (0, "r1@")
    code, out = run(capsys, "step", s("a.term"), "--system", s("intro.trs"), "--apply", "r1@")
    assert code == 0 and out.splitlines() == ["r1@ (depth 0)", "f(g(a))"]
    code, out = run(capsys, "step", s("a.term"), "--system", s("intro.trs"), "--apply", "r2@")
    assert code == 1 and out.startswith("error:")


def test_reduce(capsys):
    code, out = run(capsys, "reduce", s("a.term"), "--system", s("intro.trs"), "--fuel", "4", "--depth", "3",
                    "--format", "json")
    data = json.loads(out)
    assert code == 0 and data["steps"] == ["r1@", "r1@1.1", "r2@1", "r1@1.1.1"]
    assert data["truncation"] == "f(f(g(*)))"


def test_witness_validate(capsys):
    assert run(capsys, "witness-validate", s("intro.witness"), "--system", s("intro.trs")) == (0, "valid")
    for name, tag in [("bad_ordinal.witness", "ordinal-violation"), ("bad_endpoint.witness", "endpoint-mismatch")]:
        code, out = run(capsys, "witness-validate", s(name), "--system", s("intro.trs"), "--format", "json")
        assert code == 4 and tag in {v["tag"] for v in json.loads(out)["violations"]}
    code, out = run(capsys, "witness-validate", s("unguarded.witness"), "--system", s("intro_inductive.trs"))
    assert code == 4 and "unguarded-cycle" in out


def test_compress(capsys):
    code, out = run(capsys, "compress", s("intro.witness"), "--system", s("intro.trs"), "--depth", "3")
    assert code == 0
    lines = out.splitlines()
    assert lines[:3] == ["r1@ (depth 0)", "r1@1.1 (depth 2)", "r2@1 (depth 1)"]
    assert lines[-1] == "certificate: f(f(f(*)))"
    code, out = run(capsys, "compress", s("intro.witness"), "--system", s("intro.trs"), "--depth", "2",
                    "--print-witness", "--format", "json")
    assert code == 0 and json.loads(out)["witness"].startswith("split[0:")
    code, _ = run(capsys, "compress", s("bad_ordinal.witness"), "--system", s("intro.trs"))
    assert code == 4


def test_observe(capsys):
    code, out = run(capsys, "observe", s("omega.witness"), "--system", s("intro.trs"), "--depth", "3")
    assert code == 0 and out.splitlines()[-1] == "certificate: f(g(f(*)))"
    code, out = run(capsys, "observe", s("unguarded.witness"), "--system", s("intro_inductive.trs"))
    assert code == 3 and out.startswith("non-productive")


def test_fo(capsys):
    code, out = run(capsys, "fo", "check", s("intro.trs"))
    assert code == 0 and out.splitlines()[-1] == "left-linear"
    code, out = run(capsys, "fo", "check", s("intro_inductive.trs"), "--format", "json")
    assert json.loads(out)["rules"] == ["r1: a -> f(g(a))", "r2: g(f(x)) -> f(x)"]
    code, out = run(capsys, "fo", "reduce", s("intro.trs"), s("a.term"), "--fuel", "2")
    assert code == 0 and out.splitlines()[-1] == "truncation: f(g(f(g(a))))"


def test_lam(capsys, tmp_path):
    assert run(capsys, "lam", "print", s("omega.lam")) == (0, r"(\x. x x) (\x. x x)")
    code, out = run(capsys, "lam", "normalize", s("fix.lam"), "--fuel", "12", "--depth", "4")
    assert code == 0 and out.splitlines()[-1] == "truncation: app(g, app(g, app(g, app(g, *))))"
    p = tmp_path / "i.lam"
    p.write_text(r"(\x y. x) z")
    code, out = run(capsys, "lam", "normalize", p, "--format", "json")
    assert code == 0 and json.loads(out) == {"steps": ["beta@"], "truncation": r"\y. z"}
    p.write_text("rec L. L y")
    assert run(capsys, "lam", "print", p)[0] == 2
    assert run(capsys, "lam", "print", p, "--flags", "111")[0] == 0


def test_mumall(capsys):
    code, out = run(capsys, "mumall", "check", s("bad_duality.mumall"))
    assert code == 4 and "Duality" in out
    code, out = run(capsys, "mumall", "check", s("nu_ax.mumall"))
    assert code == 0 and out.splitlines()[-1] == "well-formed"
    assert run(capsys, "mumall", "step", s("bot_one.mumall")) == (0, "BotOne")
    code, out = run(capsys, "mumall", "step", s("bot_one.mumall"), "--apply", "BotOne@")
    assert code == 0 and out.splitlines()[-1] == "mcut[1; 2](ax[A])"
    code, out = run(capsys, "mumall", "elim", s("nu_ax.mumall"), "--depth", "3", "--format", "json")
    data = json.loads(out)
    assert code == 0 and len(data["steps"]) <= 10 and "mcut" not in data["truncation"]
    code, out = run(capsys, "mumall", "elim", s("bot_one.mumall"), "--depth", "2")
    assert code == 5 and "stuck" in out
    code, out = run(capsys, "mumall", "elim", s("loop.mumall"), "--depth", "2", "--fuel", "30")
    assert code == 5 and "fuel exhausted" in out


def test_parse_errors(capsys, tmp_path):
    assert run(capsys, "truncate", s("missing.term"))[0] == 2
    bad = tmp_path / "bad.term"
    bad.write_text("f(")
    code, out = run(capsys, "truncate", bad, "--format", "json")
    assert code == 2 and "error" in json.loads(out)
    assert run(capsys, "reduce", s("a.term"), "--system", "lam:9")[0] == 2
    assert run(capsys, "truncate", s("a.term"), "--depth", "-1")[0] == 1


def test_several_files_and_jobs(capsys, tmp_path):
    files = []
    for i in range(4):
        p = tmp_path / f"t{i}.term"
        p.write_text("rec u. " + "f(" * (i + 1) + "u" + ")" * (i + 1))
        files.append(p)
    code, out = run(capsys, "truncate", *files, "--depth", "2", "--format", "json")
    serial = json.loads(out)["results"]
    code2, out2 = run(capsys, "truncate", *files, "--depth", "2", "--format", "json", "--jobs", "4")
    assert code == code2 == 0 and json.loads(out2)["results"] == serial
    assert [r["truncation"] for r in serial] == ["f(f(*))"] * 4
    # the worst exit code wins
    code, _ = run(capsys, "truncate", files[0], s("missing.term"))
    assert code == 2


def test_printed_witness_roundtrips(capsys):
    from infrew.fo import parse_trs
    from infrew.rewrite import parse_witness, print_witness

    code, out = run(capsys, "compress", s("intro.witness"), "--system", s("intro.trs"), "--depth", "3",
                    "--print-witness", "--format", "json")
    text = json.loads(out)["witness"]
    lang = parse_trs(s("intro.trs").read_text()).lang
    assert print_witness(parse_witness(text, lang), lang) == text


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "infrew.cli", "truncate", str(s("a.term"))],
                         capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.strip() == "a"
