import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clutterreach.config import EffectorConfig
from clutterreach.effector import (LEFT, RIGHT, TIP, ContactSummary, DegenerateFitWarning,
                                   EffectorState, TactileSensor, TaxelGrid, WrenchLimits,
                                   _summarize_fast, apply_command, contact_loads, grid_records,
                                   normalize_angle, ransac_plane, ransac_plane_compensate,
                                   sample_taxels, summarize_contacts, summarize_taxels)
from clutterreach.physics import Contact, VelocityCmd
from oracles import plane_through

CFG = EffectorConfig()
L = CFG.link_length
PITCH = L / CFG.taxel_cols


def S(x=0.2, y=0.1, theta=0.0, wrench=(0.0, 0.0, 0.0)):
    return EffectorState((x, y), theta, L, net_wrench=wrench)


def contact_at(state, s, side, fn, ft=0.0):
    """Contact on the link surface ``s`` metres behind the tip on ``side``."""
    fx, fy = state.forward
    rx, ry = state.right
    sign = 1.0 if side == RIGHT else -1.0
    off = CFG.half_width * sign
    p = (state.tip_position[0] - s * fx + off * rx, state.tip_position[1] - s * fy + off * ry)
    return Contact(0, 1, p, (rx * sign, ry * sign), 0.0, fn, ft, 0.5)


def _grid(side, f):
    return TaxelGrid(side, np.asarray(f, dtype=float), PITCH)


# -- apply_command ----------------------------------------------------------

FAR_GOAL = (0.2, 5.0)


def test_command_unchanged_far_and_unloaded():
    cmd = VelocityCmd(0.0, 0.045, 0.1)
    assert apply_command(S(), cmd, WrenchLimits(), FAR_GOAL) == cmd


def test_command_force_backoff():
    out = apply_command(S(wrench=(0.0, 20.0, 0.0)), VelocityCmd(0.0, 0.045), WrenchLimits(), FAR_GOAL)
    assert out.vy <= 0.045 * 15.0 / 20.0 + 1e-15


def test_command_moment_backoff():
    out = apply_command(S(wrench=(0.0, 0.0, -9.0)), VelocityCmd(0.0, 0.0, 0.1), WrenchLimits(), FAR_GOAL)
    assert out.angular == pytest.approx(0.05)


def test_command_taper_half_radius():
    st_ = S(0.0, 0.0)
    out = apply_command(st_, VelocityCmd(0.0, 0.045, 0.1), WrenchLimits(), (0.0, 0.025), 0.05)
    assert out.speed == pytest.approx(0.6 * 0.045) and out.angular == pytest.approx(0.06)


@settings(max_examples=300)
@given(st.floats(-0.045, 0.045), st.floats(-0.045, 0.045), st.floats(-0.1, 0.1),
       st.floats(-40, 40), st.floats(-40, 40), st.floats(-10, 10), st.floats(0, 0.3))
def test_command_never_amplifies(vx, vy, w, fx, fy, mz, gd):
    cmd = VelocityCmd(vx, vy, w)
    out = apply_command(S(0.0, 0.0, wrench=(fx, fy, mz)), cmd, WrenchLimits(), (0.0, gd))
    assert abs(out.vx) <= abs(vx) + 1e-15 and abs(out.vy) <= abs(vy) + 1e-15
    assert abs(out.angular) <= abs(w) + 1e-15


def test_wrench_limits_positive():
    with pytest.raises(ValueError):
        WrenchLimits(0.0, 1.0)


def test_normalize_angle_range():
    for a in (-10.0, -math.pi, 0.0, math.pi, 7.0):
        b = normalize_angle(a)
        assert -math.pi < b <= math.pi
        assert math.isclose(math.cos(a), math.cos(b), abs_tol=1e-12)


# -- taxels -----------------------------------------------------------------

def test_taxels_empty():
    left, right = sample_taxels(S(), [], CFG)
    assert not left.forces.any() and not right.forces.any()
    assert left.forces.shape == (4, 10, 3)


@pytest.mark.parametrize("theta", [0.0, 0.8, -2.5])
def test_taxels_mid_link_left_conserves_force(theta):
    st_ = S(theta=theta)
    left, right = sample_taxels(st_, [contact_at(st_, L / 2, LEFT, 5.0)], CFG)
    assert left.forces.sum(axis=(0, 1))[2] == pytest.approx(5.0, rel=0.02)
    assert np.abs(right.forces).max() == 0.0


def test_taxels_pinch_both_sides():
    st_ = S()
    left, right = sample_taxels(st_, [contact_at(st_, 0.1, LEFT, 4.0), contact_at(st_, 0.12, RIGHT, 4.0)], CFG)
    assert left.forces[:, :, 2].sum() > 3.9 and right.forces[:, :, 2].sum() > 3.9


def test_taxels_footprint_localized():
    st_ = S()
    left, _ = sample_taxels(st_, [contact_at(st_, 0.25 * L, LEFT, 5.0)], CFG)
    col_load = left.forces[:, :, 2].sum(axis=0)
    assert int(np.argmax(col_load)) in (2,)
    assert col_load[7:].sum() < 0.01


def test_taxels_noise_seeded():
    st_ = S()
    a = sample_taxels(st_, [], CFG, np.random.default_rng(3))[0].forces
    b = sample_taxels(st_, [], CFG, np.random.default_rng(3))[0].forces
    assert np.array_equal(a, b) and a.any()


# -- RANSAC -------------------------------------------------------------------

def _plane_grid(a, b, c, rows=4, cols=10):
    r, cc = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    f = np.zeros((rows, cols, 3))
    for k in range(3):
        f[:, :, k] = (a + 0.01 * k) * cc + (b - 0.02 * k) * r + c + k
    return f


def test_ransac_pure_plane():
    g = _grid(LEFT, _plane_grid(0.1, 0.05, 0.3))
    out = ransac_plane_compensate(g, rng=np.random.default_rng(0))
    assert np.abs(out.forces).max() <= 1e-6


def test_ransac_zero():
    out = ransac_plane_compensate(_grid(LEFT, np.zeros((4, 10, 3))), rng=np.random.default_rng(0))
    assert np.abs(out.forces).max() == 0.0


def test_ransac_bump_recovered():
    f = _plane_grid(0.1, -0.04, 0.2)
    bump = [(1, 4), (1, 5), (2, 4), (2, 5)]
    for r, c in bump:
        f[r, c, 2] += 5.0
    out = ransac_plane_compensate(_grid(LEFT, f), rng=np.random.default_rng(1)).forces
    for r, c in bump:
        assert out[r, c, 2] == pytest.approx(5.0, rel=0.05)
    mask = np.ones((4, 10), bool)
    for r, c in bump:
        mask[r, c] = False
    assert np.abs(out[mask]).max() <= 0.05


def test_ransac_idempotent():
    rng = np.random.default_rng(2)
    f = _plane_grid(0.07, 0.02, -0.1) + rng.normal(0, 0.01, (4, 10, 3))
    f[2, 3, 0] += 3.0
    once = ransac_plane_compensate(_grid(RIGHT, f), rng=np.random.default_rng(5))
    twice = ransac_plane_compensate(once, rng=np.random.default_rng(6))
    assert np.abs(twice.forces - once.forces).max() <= 1e-6


def test_ransac_kernel_three_points_matches_solve():
    xs = np.array([0.0, 1.0, 0.0, 3.0])
    ys = np.array([0.0, 0.0, 1.0, 2.0])
    zs = np.array([1.0, 1.5, 0.8, 7.0])
    samples = np.array([[0, 1, 2]], dtype=np.int64)
    a, b, c, n, ok = ransac_plane(xs, ys, zs, samples, 0.01)
    ref = plane_through((0, 0, 1.0), (1, 0, 1.5), (0, 1, 0.8))
    assert ok and n == 3
    assert np.allclose((a, b, c), ref)


def test_ransac_degenerate_warns():
    g = _grid(LEFT, np.ones((1, 10, 3)))  # single row: all taxels collinear
    with pytest.warns(DegenerateFitWarning):
        out = ransac_plane_compensate(g, rng=np.random.default_rng(0))
    assert np.abs(out.forces).max() <= 1e-9


def test_ransac_too_small():
    with pytest.raises(ValueError):
        ransac_plane_compensate(_grid(LEFT, np.zeros((1, 2, 3))))


# -- summaries -----------------------------------------------------------------

def test_summary_zero():
    z = np.zeros((4, 10, 3))
    s = summarize_contacts(_grid(LEFT, z), _grid(RIGHT, z), S())
    assert s.peak_force == 0.0 and s.tip_force == 0.0


def test_summary_left_mid_link():
    f = np.zeros((4, 10, 3))
    f[2, 5, 2] = 6.0
    s = summarize_contacts(_grid(LEFT, f), _grid(RIGHT, np.zeros((4, 10, 3))), S())
    assert s.peak_region == LEFT and s.peak_force == pytest.approx(6.0)
    assert s.peak_location_along_link == pytest.approx(0.55 * L)


def test_summary_tip():
    f = np.zeros((4, 10, 3))
    f[1, 0, 2] = 3.0  # column 0 centre is 0.05 L from the tip
    s = summarize_contacts(_grid(RIGHT, np.zeros((4, 10, 3))), _grid(RIGHT, f), S())
    assert s.peak_region == TIP and s.tip_force == pytest.approx(3.0)


def test_summary_footprint_integrates_contact():
    st_ = S()
    left, right = sample_taxels(st_, [contact_at(st_, L / 2, RIGHT, 12.0)], CFG)
    s = summarize_contacts(left, right, st_)
    assert s.peak_region == RIGHT and s.peak_force == pytest.approx(12.0, rel=0.1)


def test_summary_permutation_invariant():
    rng = np.random.default_rng(9)
    left, right = _grid(LEFT, rng.normal(size=(4, 10, 3))), _grid(RIGHT, rng.normal(size=(4, 10, 3)))
    recs = grid_records(left, right)
    ref = summarize_taxels(recs, L, PITCH)
    for seed in range(20):
        random.Random(seed).shuffle(recs)
        assert summarize_taxels(recs, L, PITCH) == ref


def test_summary_fast_path_agrees():
    rng = np.random.default_rng(12)
    for _ in range(50):
        left = _grid(LEFT, rng.normal(size=(4, 10, 3)))
        right = _grid(RIGHT, rng.normal(size=(4, 10, 3)) * 2)
        a = summarize_contacts(left, right, S())
        b = _summarize_fast(left, right, L, 0.15, 2, 0.0)
        assert a.peak_region == b.peak_region
        assert a.peak_force == pytest.approx(b.peak_force, rel=1e-12)
        assert a.tip_force == pytest.approx(b.tip_force, rel=1e-12)


@pytest.mark.parametrize("theta", [0.0, 0.6, -1.7, 2.9])
@pytest.mark.parametrize("s,side,fn", [(0.15, LEFT, 12.0), (0.02, RIGHT, 3.0), (0.24, RIGHT, 6.0)])
def test_bulk_plane_compensation_recovers_summary(theta, s, side, fn):
    st_ = S(theta=theta)
    contacts = [contact_at(st_, s, side, fn, 0.3 * fn)]
    clean = summarize_contacts(*sample_taxels(st_, contacts, CFG), st_)
    biased = sample_taxels(st_, contacts, CFG, noise_std=0.0, bulk_field=CFG.bulk_field)
    comp = [ransac_plane_compensate(g, rng=np.random.default_rng(0)) for g in biased]
    got = summarize_contacts(*comp, st_)
    assert got.peak_region == clean.peak_region
    assert got.peak_force == pytest.approx(clean.peak_force, rel=0.05)
    # 5% of the contact's force scale; a relative bound is meaningless on a zero tip reading
    assert abs(got.tip_force - clean.tip_force) <= 0.05 * max(clean.tip_force, clean.peak_force)


def test_sensor_decimation_and_log():
    import io

    buf = io.StringIO()
    sensor = TactileSensor(CFG, np.random.default_rng(0), log=buf)
    st_ = S()
    loads = contact_loads(st_, [])
    for k in range(40):  # 2 s of 20 Hz ticks
        sensor.update(k * 0.05, st_, loads)
    assert sensor.samples == 30
    assert len(buf.getvalue().splitlines()) == 30
