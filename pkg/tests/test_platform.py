import pytest

from socsim.errors import ProfileError, SchedulingError
from socsim.platform import (Platform, ProcessingElement, load_synthetic_platform,
                             parse_resource_profile, write_resource_profile)
from socsim.workload import load_synthetic_job

from conftest import make_platform


def test_comm_delay_same_pe_is_zero():
    p = make_platform(2, bw=2.0)
    assert p.comm_delay(0, {1: (0, 16.0), 2: (0, 30.0)}) == 0.0


def test_comm_delay_single_parent():
    p = make_platform(2, bw=2.0)
    assert p.comm_delay(1, {0: (0, 16.0)}) == 8.0


def test_comm_delay_takes_max():
    p = make_platform(3, bw=2.0)
    assert p.comm_delay(2, {0: (0, 16.0), 1: (1, 8.0)}) == 8.0


def test_exec_time_examples():
    assert make_platform(1, mu=0.5).exec_time({0: 10.0}, 0) == 5.0
    p = make_platform(2, bw=2.0)
    assert p.exec_time({1: 10.0}, 1, {0: (0, 16.0)}) == 18.0


def test_exec_time_unsupported():
    with pytest.raises(SchedulingError):
        make_platform(2).exec_time({0: 1.0}, 1)


def test_missing_bandwidth_rejected():
    pes = tuple(ProcessingElement(i, "x", ((1.0, 1.0),)) for i in range(2))
    with pytest.raises(ValueError, match="missing bandwidth"):
        Platform(pes, {(0, 1): 1.0})


def test_active_frequency_defaults_to_max():
    pe = ProcessingElement(0, "a", ((0.9, 800.0), (1.1, 2000.0)))
    assert pe.active_frequency == 2000.0
    with pytest.raises(ValueError):
        ProcessingElement(0, "a", ((0.9, 800.0),), active_frequency=1000.0)


def test_mean_scaled_comp_on_synthetic_profile():
    # The bundled profile averages about 13.3 clocks per supported (task, PE);
    # at mu = 0.5 that scales to about 6.65.
    job = load_synthetic_job()
    costs = [c for t in job.nodes for c in t.comp_cost.values()]
    mean = sum(costs) / len(costs)
    assert mean == pytest.approx(13.3, abs=0.5)
    assert 0.5 * mean == pytest.approx(6.65, abs=0.25)


@pytest.mark.parametrize("field,values", [("comp", [1, 5, 9]), ("mu", [0.25, 0.5, 2.0]),
                                          ("w", [0, 4, 40]), ("bw", [4.0, 1.0, 0.25])])
def test_exec_time_monotone(field, values):
    out = []
    for v in values:
        kw = {"comp": 5.0, "mu": 1.0, "w": 10.0, "bw": 1.0, field: v}
        p = make_platform(2, bw=kw["bw"], mu=kw["mu"])
        out.append(p.exec_time({1: kw["comp"]}, 1, {0: (0, kw["w"])}))
    assert out == sorted(out)


def test_resource_profile_round_trip():
    p = load_synthetic_platform(mu=0.5)
    q = parse_resource_profile(write_resource_profile(p))
    assert q == p
    assert q.mu == 0.5


def test_resource_profile_errors_name_line():
    with pytest.raises(ProfileError, match="line 2"):
        parse_resource_profile("pe 0 a\nopp 7 1.0 100\n")
    with pytest.raises(ProfileError, match="missing bw"):
        parse_resource_profile("pe 0 a\npe 1 b\nopp 0 1 1\nopp 1 1 1\nbw 0 1 1.0\n")
    with pytest.raises(ProfileError, match="line 1"):
        parse_resource_profile("gpu 0\n")
