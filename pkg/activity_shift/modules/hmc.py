"""
Hamiltonian Monte Carlo sampler and convergence diagnostics.

The sampler works on an unconstrained parameter vector, adapts its step
size by dual averaging and a diagonal mass matrix from warm-up draws, and
runs independent chains from seeds spawned off one SeedSequence so the
result depends only on the seed and the chain index.
"""

import logging
import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import arviz as az
import numpy as np

from ..exceptions import ConvergenceError, ValidationError

logger = logging.getLogger(__name__)

LogDensity = Callable[[np.ndarray], Tuple[float, np.ndarray]]

MAX_RHAT = 1.05
MIN_ESS = 400.0


class HamiltonianSampler:
    """
    Single-chain HMC with fixed trajectory length.

    Args:
        log_density: Function returning (log density, gradient) at a point
        dim: Number of unconstrained parameters
        rng: Random generator owned by this chain
        n_leapfrog: Leapfrog steps per proposal
        target_accept: Acceptance rate targeted during warm-up
    """

    def __init__(self, log_density: LogDensity, dim: int, rng: np.random.Generator,
                 n_leapfrog: int = 10, target_accept: float = 0.8):
        self.log_density = log_density
        self.dim = dim
        self.rng = rng
        self.n_leapfrog = n_leapfrog
        self.target_accept = target_accept
        self.step_size = 0.1
        self.inv_mass = np.ones(dim)
        self.accepted = 0
        self.proposed = 0

    def _transition(self, position: np.ndarray, logp: float, grad: np.ndarray,
                    step_size: float) -> Tuple[np.ndarray, float, np.ndarray, float]:
        momentum = self.rng.standard_normal(self.dim) / np.sqrt(self.inv_mass)
        energy = -logp + 0.5 * np.sum(momentum ** 2 * self.inv_mass)
        q, p, g = position.copy(), momentum.copy(), grad
        new_logp = logp
        for _ in range(self.n_leapfrog):
            p = p + 0.5 * step_size * g
            q = q + step_size * self.inv_mass * p
            new_logp, g = self.log_density(q)
            if not math.isfinite(new_logp):
                break
            p = p + 0.5 * step_size * g
        if not math.isfinite(new_logp):
            return position, logp, grad, 0.0
        new_energy = -new_logp + 0.5 * np.sum(p ** 2 * self.inv_mass)
        accept_prob = 1.0 if new_energy <= energy else math.exp(energy - new_energy)
        if not math.isfinite(accept_prob):
            accept_prob = 0.0
        self.proposed += 1
        if self.rng.uniform() < accept_prob:
            self.accepted += 1
            return q, new_logp, g, accept_prob
        return position, logp, grad, accept_prob

    def _adapt_step(self, position, logp, grad, iterations: int, collect: Optional[List[np.ndarray]] = None,
                    collect_from: int = 0):
        mu = math.log(10 * self.step_size)
        h_bar, log_step_bar = 0.0, 0.0
        for m in range(1, iterations + 1):
            position, logp, grad, accept_prob = self._transition(position, logp, grad, self.step_size)
            eta = 1.0 / (m + 10)
            h_bar = (1 - eta) * h_bar + eta * (self.target_accept - accept_prob)
            log_step = mu - math.sqrt(m) / 0.05 * h_bar
            weight = m ** -0.75
            log_step_bar = weight * log_step + (1 - weight) * log_step_bar
            self.step_size = math.exp(log_step)
            if collect is not None and m > collect_from:
                collect.append(position.copy())
        self.step_size = math.exp(log_step_bar)
        return position, logp, grad

    def sample(self, initial: np.ndarray, warmup: int, draws: int) -> np.ndarray:
        """
        Run warm-up then return `draws` positions, shape (draws, dim).
        """
        position = np.asarray(initial, dtype=float)
        logp, grad = self.log_density(position)
        if not math.isfinite(logp):
            raise ValidationError("HMC initial point has zero density")
        first = warmup // 2
        collected: List[np.ndarray] = []
        position, logp, grad = self._adapt_step(position, logp, grad, first, collected, first // 2)
        if len(collected) > 10:
            stacked = np.array(collected)
            count = stacked.shape[0]
            variance = stacked.var(axis=0)
            self.inv_mass = (count / (count + 5.0)) * variance + 1e-3 * (5.0 / (count + 5.0))
        position, logp, grad = self._adapt_step(position, logp, grad, warmup - first)
        self.accepted = self.proposed = 0
        out = np.empty((draws, self.dim))
        for i in range(draws):
            jittered = self.step_size * self.rng.uniform(0.9, 1.1)
            position, logp, grad, _ = self._transition(position, logp, grad, jittered)
            out[i] = position
        logger.debug(f"HMC chain: step={self.step_size:.4g}, acceptance={self.acceptance_rate:.3f}")
        return out

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.proposed if self.proposed else 0.0


def run_chains(log_density: LogDensity, initial: Callable[[np.random.Generator], np.ndarray], dim: int,
               chains: int, warmup: int, draws: int, seed: Optional[int],
               n_leapfrog: int = 10) -> Tuple[np.ndarray, List[np.random.Generator]]:
    """
    Run independent chains in chain-index order.

    Returns:
        (draws array of shape (chains, draws, dim), per-chain generators for follow-up draws)
    """
    if chains < 2:
        raise ValidationError(f"MCMC needs at least 2 chains, got {chains}")
    if draws < 1000:
        raise ValidationError(f"MCMC needs at least 1000 draws per chain, got {draws}")
    generators = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(chains)]
    out = np.empty((chains, draws, dim))
    for index, rng in enumerate(generators):
        sampler = HamiltonianSampler(log_density, dim, rng, n_leapfrog=n_leapfrog)
        out[index] = sampler.sample(initial(rng), warmup, draws)
    return out, generators


def diagnose(samples: Dict[str, np.ndarray]) -> Dict[str, Dict[str, float]]:
    """
    Rank-normalized split-R-hat and bulk ESS for every named (chains, draws) array.
    """
    dataset = az.convert_to_dataset({name: np.asarray(values, dtype=float) for name, values in samples.items()})
    rhat = az.rhat(dataset)
    ess = az.ess(dataset, method="bulk")
    return {
        name: {"rhat": float(rhat[name].values), "ess": float(ess[name].values)}
        for name in samples
    }


def check_convergence(diagnostics: Dict[str, Dict[str, float]], names: Sequence[str]) -> None:
    """
    Raise ConvergenceError if any named parameter misses the thresholds.
    """
    failing = {
        name: diagnostics[name] for name in names
        if not (diagnostics[name]["rhat"] <= MAX_RHAT and diagnostics[name]["ess"] >= MIN_ESS)
    }
    if failing:
        logger.warning(f"MCMC convergence check failed: {failing}")
        raise ConvergenceError(diagnostics, f"MCMC did not converge for {sorted(failing)}: {failing}")
