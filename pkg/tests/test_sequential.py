import numpy as np
import pytest

from csdecon.operators import PsfOperator
from csdecon.phantoms import AcquisitionSpec, acquire, gaussian_psf
from csdecon.sequential import (
    SequentialConfig,
    cs_objective,
    cs_reconstruct,
    deconv_objective,
    deconvolve_fb,
    sequential_reconstruct,
)
from csdecon.transforms import HaarWavelet, SensingOperator

from conftest import rel_err


def _instance(n=32, ratio=0.5, snr=None, seed=0):
    rng = np.random.default_rng(seed)
    x = np.zeros((n, n))
    idx = rng.choice(n * n, n, replace=False)
    x.flat[idx] = rng.choice([-1.0, 1.0], n) * rng.uniform(0.5, 1.5, n)
    psf = PsfOperator(gaussian_psf(7, 1.0), (n, n))
    acq = acquire(x, psf, AcquisitionSpec(ratio, snr, seed + 1, seed + 2))
    return x, psf, HaarWavelet((n, n), 3), acq


# oracles

def test_cs_objective_decreases_from_initialization():
    for seed in range(3):
        x, psf, wav, acq = _instance(seed=seed, snr=30.0)
        cfg = SequentialConfig(mu=1e-2)
        _, stage = cs_reconstruct(acq.y, acq.sensing, wav, cfg, report=True)
        a0 = wav.forward(acq.sensing.adjoint(acq.y).reshape(wav.shape))
        assert stage.objective[0] == pytest.approx(cs_objective(a0, acq.y, acq.sensing, wav, cfg.mu))
        assert stage.objective[-1] <= stage.objective[0]
        assert np.all(np.diff(stage.objective) <= 1e-12 * abs(stage.objective[0]))


def test_fb_objective_monotone():
    rng = np.random.default_rng(7)
    psf = PsfOperator(gaussian_psf(7, 2.0), (32, 32))
    r = rng.standard_normal((32, 32))
    for p in (1.0, 1.5, 2.0):
        cfg = SequentialConfig(alpha=0.3, p=p, fb_tol=1e-8, fb_max_iter=200)
        _, stage = deconvolve_fb(r, psf, cfg, report=True)
        f = np.array(stage.objective)
        assert np.all(np.diff(f) <= 1e-12 * f[0])


# stage 1

def test_full_sampling_small_mu_inverts():
    x, psf, wav, acq = _instance(ratio=1.0)
    r_hat = cs_reconstruct(acq.y, acq.sensing, wav, SequentialConfig(mu=1e-10))
    assert np.abs(r_hat - psf.apply(x)).max() < 1e-6


def test_zero_measurements_give_zero():
    wav = HaarWavelet((16, 16), 3)
    sens = SensingOperator((16, 16), 100, 0)
    assert not cs_reconstruct(np.zeros(100), sens, wav, SequentialConfig()).any()


# stage 2

def test_fb_identity_psf_one_step():
    r = np.random.default_rng(1).standard_normal((16, 16))
    psf = PsfOperator(np.ones((1, 1)), (16, 16))
    cfg = SequentialConfig(alpha=1e-300, fb_max_iter=1)
    np.testing.assert_allclose(deconvolve_fb(r, psf, cfg), r, atol=1e-12)


def test_fb_huge_alpha_gives_zero():
    r = np.random.default_rng(1).standard_normal((16, 16))
    psf = PsfOperator(gaussian_psf(5, 1.0), (16, 16))
    assert not deconvolve_fb(r, psf, SequentialConfig(alpha=1e12)).any()


def test_fb_step_contract():
    psf = PsfOperator(gaussian_psf(5, 1.0), (16, 16))
    with pytest.raises(ValueError):
        deconvolve_fb(np.zeros((16, 16)), psf, SequentialConfig(fb_step=2.0 / psf.lipschitz))


def test_deconv_objective_has_no_half():
    psf = PsfOperator(np.ones((1, 1)), (4, 4))
    r = np.ones((4, 4))
    assert deconv_objective(np.zeros((4, 4)), r, psf, 1.0, 1.0) == 16.0


# both stages

def test_end_to_end_sparse_recovery():
    x, psf, wav, acq = _instance(n=64, ratio=1.0, seed=5)
    cfg = SequentialConfig(mu=1e-8, alpha=1e-3, fb_tol=1e-6, fb_max_iter=5000)
    xh, rep = sequential_reconstruct(acq.y, acq.sensing, psf, wav, cfg)
    assert rel_err(xh, x) < 0.15
    assert rep.iterations == rep.cs.iterations + rep.deconv.iterations
    row = rep.as_row()
    assert row["cs_iterations"] == rep.cs.iterations


def test_single_zero_measurement_is_flagged():
    wav = HaarWavelet((16, 16), 3)
    psf = PsfOperator(gaussian_psf(5, 1.0), (16, 16))
    sens = SensingOperator((16, 16), 1, 0)
    xh, rep = sequential_reconstruct(np.zeros(1), sens, psf, wav, SequentialConfig())
    assert not rep.converged and rep.note
    assert not xh.any()


def test_config_validation():
    with pytest.raises(ValueError):
        SequentialConfig(mu=0.0)
    with pytest.raises(ValueError):
        SequentialConfig(p=0.5)
    with pytest.raises(ValueError):
        SequentialConfig(fb_step=-1.0)
