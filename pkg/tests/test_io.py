import csv
import json
import os

import numpy as np
import pytest

from llecomb import io as cio
from llecomb.evolution import RampSchedule, evolve, spectrum
from llecomb.model import Parameters, enumerate_bifpoints
from llecomb.spectral import FieldState, get_grid

from conftest import cached_branch


@pytest.fixture(scope="module")
def branch():
    return cached_branch("bar", 0.1, 0.0, 5, 1)


def test_branch_round_trip(tmp_path, branch):
    paths = cio.write_branch(tmp_path / "b", branch)
    assert set(paths) == {"csv", "points", "json"}
    back = cio.read_branch(paths["csv"])
    assert back.mode == branch.mode and back.fixed_param == branch.fixed_param and back.d == branch.d
    assert len(back.points) == len(branch.points)
    for p, q in zip(branch.points, back.points):
        assert abs(p.param - q.param) <= 1e-12
        assert abs(p.l2norm - q.l2norm) <= 1e-12
        assert p.state.allclose(q.state, atol=1e-12)
        assert np.max(np.abs(p.tangent - q.tangent)) <= 1e-12
        assert p.constraint == q.constraint and p.det_sign == q.det_sign
    assert [(e.kind, e.index) for e in back.events] == [(e.kind, e.index) for e in branch.events]
    assert back.origin.k == 5 and back.origin.sigma == 1


@pytest.mark.parametrize("which", ["b.json", "b.points.csv", "b"])
def test_read_branch_from_any_member(tmp_path, branch, which):
    cio.write_branch(tmp_path / "b", branch)
    assert len(cio.read_branch(tmp_path / which).points) == len(branch.points)


def test_read_branch_missing_file(tmp_path, branch):
    cio.write_branch(tmp_path / "b", branch)
    os.unlink(tmp_path / "b.points.csv")
    with pytest.raises(FileNotFoundError, match="points"):
        cio.read_branch(tmp_path / "b.csv")


def test_sidecars_cover_start_events_end(tmp_path, branch):
    cio.write_branch(tmp_path / "b", branch)
    meta = json.loads((tmp_path / "b.json").read_text())
    idx = {int(i) for i in meta["sidecars"]}
    assert {0, len(branch.points) - 1} <= idx
    assert {e.index for e in branch.events} <= idx
    for i, rel in meta["sidecars"].items():
        assert cio.read_state(tmp_path / rel).allclose(branch.points[int(i)].state, atol=0.0)


def test_state_file_is_lossless(tmp_path):
    g = get_grid(32)
    rng = np.random.default_rng(5)
    u = FieldState(rng.standard_normal(32) * 1e-7, rng.standard_normal(32) * 1e5, g)
    cio.write_state(tmp_path / "s.csv", u, comment="param=1")
    v = cio.read_state(tmp_path / "s.csv")
    assert np.array_equal(u.a1, v.a1) and np.array_equal(u.a2, v.a2)


def test_read_state_rejects_other_csv(tmp_path):
    (tmp_path / "t.csv").write_text("t,zeta,l2norm\n0,0,0\n")
    with pytest.raises(ValueError):
        cio.read_state(tmp_path / "t.csv")


def test_candidate_table_format():
    p = Parameters(d=-0.2, zeta=10.0)
    text = cio.candidates_csv(enumerate_bifpoints("bar", p))
    rows = list(csv.reader(text.splitlines()))
    assert rows[0] == cio.CANDIDATE_COLUMNS
    body = rows[1:]
    assert len(body) == 12
    keys = [(int(r[0]), int(r[1])) for r in body]
    assert keys == sorted(keys)
    for r in body:
        for col in (2, 3):
            assert len(r[col].split(".")[1]) == 6
    row = next(r for r in body if (r[0], r[1]) == ("1", "1"))
    assert abs(float(row[3]) - 12.30707) <= 1e-5


def test_candidate_json_types():
    p = Parameters(d=0.1, f=1.6)
    data = json.loads(cio.candidates_json(enumerate_bifpoints("hat", p), p, "hat"))
    assert data["mode"] == "hat" and len(data["candidates"]) == 14
    assert all(isinstance(c["S"], bool) and isinstance(c["k"], int) for c in data["candidates"])


def test_atomic_write_leaves_no_temporaries(tmp_path):
    target = tmp_path / "sub" / "x.txt"
    cio.atomic_write(target, "one")
    cio.atomic_write(target, "two")
    assert target.read_text() == "two"
    assert [p.name for p in target.parent.iterdir()] == ["x.txt"]


def test_atomic_write_keeps_old_file_on_error(tmp_path):
    target = tmp_path / "x.txt"
    cio.atomic_write(target, "old")
    with pytest.raises(TypeError):
        cio.atomic_write(target, 123)
    assert target.read_text() == "old"
    assert [p.name for p in tmp_path.iterdir()] == ["x.txt"]


def test_output_dir_env(monkeypatch, tmp_path):
    monkeypatch.setenv(cio.OUT_DIR_ENV, str(tmp_path))
    assert cio.output_dir("elsewhere") == tmp_path
    monkeypatch.delenv(cio.OUT_DIR_ENV)
    assert str(cio.output_dir("elsewhere")) == "elsewhere"


def test_trajectory_and_spectrum_files(tmp_path):
    g = get_grid(32)
    p = Parameters(d=0.1, zeta=-5.0, f=1.6)
    traj = evolve(FieldState.zeros(g), RampSchedule.constant(-5.0, 0.1), p, dt=1e-3, sample_every=10)
    cio.write_trajectory(tmp_path / "t.csv", traj)
    arr = cio.read_trajectory_csv(tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_text().splitlines()[0] == "t,zeta,l2norm"
    assert np.array_equal(arr[:, 0], traj.t) and np.array_equal(arr[:, 2], traj.l2norm)
    cio.write_spectrum(tmp_path / "s.csv", spectrum(traj.final))
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0].startswith("# ")
    assert "k,log_abs_ak" in lines
    assert sum(1 for ln in lines if not ln.startswith("#")) == 33
