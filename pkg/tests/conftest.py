"""Shared fixtures: the full simulated probe protocol is expensive, so it is
built once per session and reused by the module tests and the acceptance
suite."""

import time

import numpy as np
import pytest

from csqpt import (
    ChannelModel,
    MleConfig,
    apply_process,
    bin_dataset,
    build_povm,
    coherent_density,
    loss_channel_tensor,
    process_mle,
    sample_dataset,
    state_mle,
    truncate_process_tensor,
)

# Probe ladder used throughout: 9 amplitudes 0 .. 1.100 in steps of 0.1375.
PROBE_ALPHAS = tuple(0.1375 * k for k in range(9))

CHANNEL = ChannelModel(eta=0.62, phi=0.92)
N_SAMPLES = 500_000
PHASE_SECTIONS = 20
DIM_SIM = 12
DIM_REC = 7
DIM_WORK = 9  # reconstruction buffer: truncated back to DIM_REC afterwards
BASE_SEED = 20_250


def default_edges():
    return np.linspace(-5.0, 5.0, 101)


@pytest.fixture(scope="session")
def povm_rec():
    return build_povm(PHASE_SECTIONS, default_edges(), DIM_REC)


@pytest.fixture(scope="session")
def povm_work():
    return build_povm(PHASE_SECTIONS, default_edges(), DIM_WORK)


@pytest.fixture(scope="session")
def probe_datasets():
    """Simulated channel-output datasets for the 9-probe protocol."""
    tensor = loss_channel_tensor(CHANNEL, DIM_SIM)
    out = []
    for i, alpha in enumerate(PROBE_ALPHAS):
        rho_out = apply_process(tensor, coherent_density(alpha, DIM_SIM))
        out.append(sample_dataset(rho_out, PHASE_SECTIONS, N_SAMPLES, seed=BASE_SEED + i, probe_alpha=alpha))
    return out


@pytest.fixture(scope="session")
def protocol_reconstruction(probe_datasets, povm_work):
    """Process tensor reconstructed from the protocol data, at DIM_REC."""
    start = time.time()
    probes = [(ds.probe_alpha, bin_dataset(ds, povm_work)) for ds in probe_datasets]
    cfg = MleConfig(max_iter=5000, rel_tol=1e-12, dilution=0.5, dim=DIM_WORK)
    result = process_mle(probes, povm_work, cfg)
    return {
        "result": result,
        "tensor": truncate_process_tensor(result.tensor, DIM_REC),
        "reference": loss_channel_tensor(CHANNEL, DIM_REC),
        "elapsed": time.time() - start,
    }


@pytest.fixture(scope="session")
def coherent_state_reconstruction(povm_rec):
    """State tomography of the 0.8250 probe at the protocol sample size."""
    alpha = 0.8250
    ds = sample_dataset(coherent_density(alpha, DIM_SIM), PHASE_SECTIONS, N_SAMPLES, seed=777, probe_alpha=alpha)
    start = time.time()
    result = state_mle(bin_dataset(ds, povm_rec), povm_rec, MleConfig(dim=DIM_REC))
    return {"alpha": alpha, "dataset": ds, "result": result, "elapsed": time.time() - start}
