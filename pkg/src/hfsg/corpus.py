"""Self-contained stand-in for real submetered recordings.

Each signature is a harmonic series locked to the mains fundamental:
``sum_h a_h sin(h w t + phi_h)`` with ``a_h = I1 exp(-decay (h-1))`` and
phases drawn from [-pi/2, pi/2], so the fundamental always draws positive
active power from a zero-phase voltage reference.
"""

import numpy as np

from .rng import stream
from .signalio import (DEFAULT_MAINS_HZ, DEFAULT_SAMPLE_RATE, DEFAULT_WINDOW, SignatureMatrix,
                       samples_per_cycle_for)


def harmonic_signature(amplitudes, phases, n_samples, samples_per_cycle):
    phase = 2.0 * np.pi * (np.arange(n_samples) % samples_per_cycle) / samples_per_cycle
    h = np.arange(1, len(amplitudes) + 1)[:, None]
    return (np.asarray(amplitudes)[:, None] * np.sin(h * phase + np.asarray(phases)[:, None])).sum(axis=0)


def pseudo_real_corpus(n_signatures=200, n_samples=DEFAULT_WINDOW, sample_rate_hz=DEFAULT_SAMPLE_RATE,
                       mains_frequency_hz=DEFAULT_MAINS_HZ, max_harmonics=15, fundamental_range=(0.5, 10.0),
                       decay_range=(0.2, 1.5), seed=0):
    """Draw ``n_signatures`` independent harmonic-series current signatures.

    The fundamental amplitude is log-uniform over ``fundamental_range`` (A),
    the number of harmonics uniform over 1..max_harmonics and the exponential
    decay rate uniform over ``decay_range``.
    """
    spc = samples_per_cycle_for(mains_frequency_hz, sample_rate_hz)
    if n_samples % spc:
        raise ValueError(f"n_samples={n_samples} is not a whole number of cycles")
    rng = stream(seed, "pseudo-real-corpus")
    lo, hi = np.log(fundamental_range[0]), np.log(fundamental_range[1])
    out = np.empty((n_signatures, n_samples))
    for i in range(n_signatures):
        n_h = int(rng.integers(1, max_harmonics + 1))
        i1 = np.exp(rng.uniform(lo, hi))
        decay = rng.uniform(*decay_range)
        amps = i1 * np.exp(-decay * np.arange(n_h))
        phases = rng.uniform(-np.pi / 2, np.pi / 2, size=n_h)
        out[i] = harmonic_signature(amps, phases, n_samples, spc)
    return SignatureMatrix(out, sample_rate_hz, spc)
