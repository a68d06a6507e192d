"""End-to-end key material: probe, pick informative entries, quantize."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..channel import Scenario, synthesize_channel
from ..design import DesignedMatrices
from ..probing import Pilots, probe_round
from .quantize import KeyMaterial, cqa_quantize, informative_entries


@dataclass(frozen=True)
class LinkSamples:
    """Aligned observations over many rounds: rows are rounds."""

    zBS: list[np.ndarray]
    zUT: list[np.ndarray]
    entries: list[np.ndarray]


def link_entries(D: DesignedMatrices, Lambda: Sequence[np.ndarray], rel: float = 0.01) -> list[np.ndarray]:
    """Informative observation entries of every UT under design ``D``."""
    return [informative_entries(L, np.kron(D.Pt[k].conj(), D.Ct[k]), rel)
            for k, L in enumerate(Lambda)]


def probe_rounds(s: Scenario, D: DesignedMatrices, pilots: Pilots, noise_var: float,
                 rounds: int, rng: np.random.Generator,
                 entries: Sequence[np.ndarray], users: Sequence[int] | None = None,
                 H: list[np.ndarray] | None = None) -> LinkSamples:
    """Run ``rounds`` independent probing rounds.

    ``users`` restricts who transmits (the others stay silent); by default
    every UT of ``s`` takes part. ``H`` reuses given channel draws.
    """
    users = list(range(s.K)) if users is None else list(users)
    if H is None:
        H = synthesize_channel(s, rng, size=rounds).H
    sub = Pilots([pilots.S_DL[k] for k in users], [pilots.S_UL[k] for k in users], pilots.config)
    obs = probe_round([H[k] for k in users], [D.P[k] for k in users],
                      [D.C[k] for k in users], sub, noise_var, rng)
    return LinkSamples(
        zBS=[obs.zUL[i][:, entries[k]] for i, k in enumerate(users)],
        zUT=[obs.zDL[i][:, entries[k]] for i, k in enumerate(users)],
        entries=[entries[k] for k in users],
    )


def quantize_links(samples: LinkSamples, bits_per_sample: int = 2) -> KeyMaterial:
    """CQA on every link with the BS as leader."""
    mats = [cqa_quantize(a, b, bits_per_sample) for a, b in zip(samples.zBS, samples.zUT)]
    return KeyMaterial([m.bits_bs[0] for m in mats], [m.bits_ut[0] for m in mats],
                       [m.public_helper[0] for m in mats], bits_per_sample)


def split_keys(bits: np.ndarray, key_bits: int = 256) -> list[np.ndarray]:
    """Cut a bit stream into whole keys, dropping the remainder."""
    n = bits.size // key_bits
    return [bits[i * key_bits:(i + 1) * key_bits] for i in range(n)]
