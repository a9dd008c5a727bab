"""The negative-phase sampler contract and its three classical implementations.

A sampler turns RBM parameters into a :class:`~clampbm.models.SampleSet`:

- :class:`ExactSampler` enumerates every ``(v, h)`` state and returns the
  Boltzmann probabilities as weights. It is the oracle the other two are
  tested against and is only usable up to ``MAX_ENUMERATION_UNITS`` units.
- :class:`GibbsSampler` runs block Gibbs chains, alternating
  ``h ~ p(h | v)`` and ``v ~ p(v | h)``.
- :class:`AnnealingSampler` stands in for the annealer: the RBM is embedded
  on a chimera graph, written as a QUBO, annealed from a random state per
  read along a geometric temperature schedule (single-qubit and whole-chain
  moves), and the chains are majority-voted back to logical units.

Reads from the Gibbs and annealing samplers carry weight 1 each and are taken
at temperature 1; no effective-temperature correction is applied.
"""

from __future__ import annotations

import enum
import functools
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from clampbm import chimera
from clampbm.chimera import ChimeraGraph
from clampbm.models import (
    BitArray,
    CapacityError,
    FloatArray,
    InvalidInputError,
    RbmParameters,
    SampleSet,
    as_bits,
    energies,
)

MAX_ENUMERATION_UNITS = 20
DEFAULT_BURN_IN = 100


class Sampler(Protocol):
    def sample(self, params: RbmParameters, n_samples: int, seed: int) -> SampleSet: ...


class SamplerKind(enum.StrEnum):
    EXACT = "exact"
    GIBBS = "gibbs"
    SA_CHIMERA = "sa-chimera"


def sigmoid(x: FloatArray) -> FloatArray:
    return np.asarray(0.5 * (1.0 + np.tanh(0.5 * np.asarray(x))), dtype=np.float64)


def energy(params: RbmParameters, visible: BitArray, hidden: BitArray) -> float:
    v = as_bits(visible, "visible state")
    h = as_bits(hidden, "hidden state")
    if v.shape != (params.n_visible,) or h.shape != (params.n_hidden,):
        raise InvalidInputError(
            f"state shapes {v.shape} and {h.shape} do not match a "
            f"{params.n_visible}x{params.n_hidden} RBM"
        )
    return float(energies(params, v, h)[0])


def all_states(n_units: int) -> BitArray:
    """Every binary vector of length ``n_units``, first unit most significant."""
    codes = np.arange(2**n_units, dtype=np.int64)[:, None]
    shifts = np.arange(n_units - 1, -1, -1, dtype=np.int64)
    return ((codes >> shifts) & 1).astype(np.int8)


def _require_enumerable(params: RbmParameters) -> None:
    units = params.n_visible + params.n_hidden
    if units > MAX_ENUMERATION_UNITS:
        raise CapacityError(
            f"exact enumeration is limited to {MAX_ENUMERATION_UNITS} units; "
            f"this RBM has {params.n_visible} visible + {params.n_hidden} hidden = {units}"
        )


def _logsumexp(values: FloatArray) -> float:
    peak = float(np.max(values))
    return peak + math.log(float(np.sum(np.exp(values - peak))))


def exact_distribution(params: RbmParameters) -> SampleSet:
    """All ``2^(n+m)`` states weighted by ``exp(-E) / Z``."""
    _require_enumerable(params)
    states = all_states(params.n_visible + params.n_hidden)
    visible, hidden = states[:, : params.n_visible], states[:, params.n_visible :]
    log_weights = -energies(params, visible, hidden)
    probabilities = np.exp(log_weights - _logsumexp(log_weights))
    return SampleSet.from_states(params, visible, hidden, probabilities / probabilities.sum())


def free_energy(params: RbmParameters, visible: BitArray) -> FloatArray:
    """``F(v) = -a.v - sum_j log(1 + exp(b_j + (W^T v)_j))`` per row."""
    v = np.atleast_2d(visible).astype(np.float64)
    if v.shape[1] != params.n_visible:
        raise InvalidInputError(f"expected {params.n_visible} visible units, got {v.shape[1]}")
    activation = params.hidden_bias + v @ params.weights
    return np.asarray(-(v @ params.visible_bias) - np.logaddexp(0.0, activation).sum(axis=1))


def log_partition(params: RbmParameters) -> float:
    _require_enumerable(params)
    return _logsumexp(-free_energy(params, all_states(params.n_visible)))


def visible_marginal(params: RbmParameters, visible: BitArray) -> float:
    """``P(v) = sum_h exp(-E(v, h)) / Z``."""
    _require_enumerable(params)
    v = as_bits(visible, "visible state")
    if v.shape != (params.n_visible,):
        raise InvalidInputError(f"expected {params.n_visible} visible units, got {v.shape}")
    return math.exp(float(-free_energy(params, v)[0]) - log_partition(params))


def gibbs_sample(
    params: RbmParameters,
    n_samples: int,
    n_burn_in: int = DEFAULT_BURN_IN,
    seed: int = 0,
    n_chains: int = 1,
) -> SampleSet:
    """Block Gibbs reads: one per sweep (per chain) after ``n_burn_in`` sweeps.

    Each sweep draws ``h ~ p(h | v)``, records ``(v, h)``, then draws
    ``v ~ p(v | h)``. With several chains they advance in lockstep from one
    generator and reads are interleaved sweep by sweep.
    """
    if n_samples < 1 or n_burn_in < 0 or n_chains < 1:
        raise InvalidInputError("need n_samples >= 1, n_burn_in >= 0 and n_chains >= 1")
    rng = np.random.default_rng(seed)
    a, b, w = params.visible_bias, params.hidden_bias, params.weights
    v = rng.integers(0, 2, size=(n_chains, params.n_visible)).astype(np.float64)
    n_sweeps = n_burn_in + math.ceil(n_samples / n_chains)
    visible_reads: list[FloatArray] = []
    hidden_reads: list[FloatArray] = []
    for sweep in range(n_sweeps):
        h = (rng.random((n_chains, params.n_hidden)) < sigmoid(b + v @ w)).astype(np.float64)
        if sweep >= n_burn_in:
            visible_reads.append(v)
            hidden_reads.append(h)
        v = (rng.random((n_chains, params.n_visible)) < sigmoid(a + h @ w.T)).astype(np.float64)
    visible = np.vstack(visible_reads)[:n_samples].astype(np.int8)
    hidden = np.vstack(hidden_reads)[:n_samples].astype(np.int8)
    return SampleSet.from_states(params, visible, hidden)


@dataclass(frozen=True)
class AnnealingSchedule:
    """Geometric cooling from ``t_start`` to ``t_end`` over ``n_steps`` sweeps."""

    t_start: float = 10.0
    t_end: float = 0.1
    n_steps: int = 1000

    def __post_init__(self) -> None:
        if not (self.t_start > 0 and self.t_end > 0 and self.n_steps >= 1):
            raise InvalidInputError("annealing temperatures must be positive with n_steps >= 1")

    def temperatures(self) -> FloatArray:
        if self.n_steps == 1:
            return np.array([self.t_end])
        return np.geomspace(self.t_start, self.t_end, self.n_steps)


@functools.cache
def _default_graph() -> ChimeraGraph:
    return chimera.build_chimera()


def anneal_qubo(
    linear: FloatArray,
    couplings: FloatArray,
    n_reads: int,
    schedule: AnnealingSchedule,
    rng: np.random.Generator,
    clusters: Sequence[Sequence[int]] = (),
) -> BitArray:
    """Metropolis annealing, all reads advanced together.

    ``couplings`` is the symmetric coupling matrix (zero diagonal). Each
    temperature step is one sequential single-flip sweep over the variables,
    then one joint-flip proposal per cluster of two or more variables (the
    chains), so strong chain couplers do not freeze logical variables early.
    """
    n = linear.size
    blocks = [np.asarray(cluster, dtype=np.int64) for cluster in clusters if len(cluster) > 1]
    state = rng.integers(0, 2, size=(n_reads, n)).astype(np.float64)
    fields = state @ couplings
    for temperature in schedule.temperatures():
        draws = rng.random((n_reads, n))
        for i in range(n):
            direction = 1.0 - 2.0 * state[:, i]
            delta = direction * (linear[i] + fields[:, i])
            accept = draws[:, i] < np.exp(np.minimum(0.0, -delta / temperature))
            change = np.where(accept, direction, 0.0)
            state[:, i] += change
            fields += change[:, None] * couplings[i][None, :]
        for index in blocks:
            direction = 1.0 - 2.0 * state[:, index]
            block = couplings[np.ix_(index, index)]
            delta = (direction * (linear[index] + fields[:, index])).sum(axis=1)
            delta += 0.5 * np.einsum("ri,ij,rj->r", direction, block, direction)
            accept = rng.random(n_reads) < np.exp(np.minimum(0.0, -delta / temperature))
            change = np.where(accept[:, None], direction, 0.0)
            state[:, index] += change
            fields += change @ couplings[index]
    return state.astype(np.int8)


def sa_chimera_sample(
    params: RbmParameters,
    n_samples: int,
    schedule: AnnealingSchedule | None = None,
    seed: int = 0,
    *,
    graph: ChimeraGraph | None = None,
    chain_strength: float | None = None,
) -> SampleSet:
    if n_samples < 1:
        raise InvalidInputError("n_samples must be at least 1")
    graph = graph if graph is not None else _default_graph()
    if chain_strength is None:
        chain_strength = chimera.default_chain_strength(params)
    embedding = chimera.embed_rbm(params.n_visible, params.n_hidden, graph, chain_strength)
    qubo = chimera.rbm_to_qubo(params, embedding)
    order = embedding.qubits()
    linear, couplings = qubo.dense(order)
    rng = np.random.default_rng(seed)
    position = {qubit: index for index, qubit in enumerate(order)}
    chains = [[position[q] for q in chain] for chain in embedding.chains.values()]
    schedule = schedule or AnnealingSchedule()
    physical = anneal_qubo(linear, couplings, n_samples, schedule, rng, chains)
    visible, hidden = chimera.unembed(embedding, order, physical, rng)
    return SampleSet.from_states(params, visible, hidden)


@dataclass(frozen=True)
class ExactSampler:
    """Exact model expectations; ``n_samples`` and ``seed`` are ignored."""

    def sample(self, params: RbmParameters, n_samples: int, seed: int) -> SampleSet:
        return exact_distribution(params)


@dataclass(frozen=True)
class GibbsSampler:
    n_burn_in: int = DEFAULT_BURN_IN
    n_chains: int = 1

    def sample(self, params: RbmParameters, n_samples: int, seed: int) -> SampleSet:
        return gibbs_sample(params, n_samples, self.n_burn_in, seed, self.n_chains)


@dataclass(frozen=True)
class AnnealingSampler:
    schedule: AnnealingSchedule = field(default_factory=AnnealingSchedule)
    graph: ChimeraGraph = field(default_factory=_default_graph, repr=False)
    chain_strength: float | None = None

    def sample(self, params: RbmParameters, n_samples: int, seed: int) -> SampleSet:
        return sa_chimera_sample(
            params,
            n_samples,
            self.schedule,
            seed,
            graph=self.graph,
            chain_strength=self.chain_strength,
        )


def make_sampler(
    kind: SamplerKind | str,
    *,
    n_burn_in: int = DEFAULT_BURN_IN,
    n_chains: int = 1,
    schedule: AnnealingSchedule | None = None,
) -> Sampler:
    try:
        kind = SamplerKind(kind)
    except ValueError:
        choices = ", ".join(k.value for k in SamplerKind)
        raise InvalidInputError(f"unknown sampler {kind!r} (choose from {choices})") from None
    if kind is SamplerKind.EXACT:
        return ExactSampler()
    if kind is SamplerKind.GIBBS:
        return GibbsSampler(n_burn_in=n_burn_in, n_chains=n_chains)
    return AnnealingSampler(schedule=schedule or AnnealingSchedule())
