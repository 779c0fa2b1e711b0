"""Diagnostic suites for the divergence estimators and hindsight weighting.

Each suite returns a ``DiagnosticReport`` whose lines are written to
``diag_<suite>.txt``; any entry in ``failures`` makes the CLI exit 1.

    prop1         cubic decay of |KL − QKL| under shrinking perturbations
    prop2         Var[½ logdiff²] ≤ Var[logdiff] on random nearby categoricals
    prop3         the QKL improvement bound on exactly solved tabular MDPs
    unbiasedness  prefix-weighted hindsight return equals the direct return
    ess           effective sample sizes and naive-vs-quadratic KL variance
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch.distributions import Categorical, Independent, Normal

from src.diffnet.networks import DTYPE, PolicyNet
from src.divergence.checks import prop1_taylor_check, prop2_variance_check, prop3_bound_check
from src.divergence.estimators import naive_kl_sample_estimate, qkl_sample_estimate
from src.envs.registry import make_env
from src.errors import ConfigurationError
from src.evaluation.enumerable import (
    improvement_case,
    random_discounted_mdp,
    random_goal_policy,
    softmax_policy,
    two_state_mdp,
    unbiasedness_deviations,
)
from src.hindsight.ess import ess_report
from src.hindsight.goals import build_goal_sets, sample_hindsight_goals
from src.hindsight.relabel import HindsightBatch, relabel
from src.models.config import build_config
from src.models.initial_state import build_policy
from src.paths import diagnostics_path
from src.rollout.collector import collect
from src.seeding import Stream, derive_seed, numpy_rng, torch_generator

logger = logging.getLogger(__name__)

UNBIASEDNESS_ATOL = 1e-9
ESS_TRIALS = 20
ESS_STRICT_FRACTION = 0.95


@dataclass
class DiagnosticReport:
    suite: str
    lines: list[str] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def add(self, line: str) -> None:
        self.lines.append(line)

    def fail(self, case: str) -> None:
        self.failures.append(case)
        self.lines.append(f"FAIL {case}")

    def render(self) -> str:
        verdict = "PASS" if self.passed else f"FAIL ({len(self.failures)} failing)"
        return "\n".join([f"suite: {self.suite}", *self.lines, f"result: {verdict}"]) + "\n"


# ── Suites ───────────────────────────────────────────────────────────────


def prop1_suite(seed: int) -> DiagnosticReport:
    report = DiagnosticReport("prop1")
    taylor = prop1_taylor_check()
    report.add(f"{'eta':>8}  {'|KL-QKL|':>12}  {'/eta^3':>10}  {'halving':>8}")
    for row in taylor.rows:
        report.add(
            f"{row.eta:8.0e}  {row.remainder:12.4e}  {row.scaled:10.4f}  {row.halving_ratio:8.3f}"
        )
        if not 6.0 <= row.halving_ratio <= 10.0:
            report.fail(f"eta={row.eta:g}: halving ratio {row.halving_ratio:.3f} outside [6, 10]")
    if taylor.passed and not report.failures:
        report.add("remainder decays cubically")
    elif not report.failures:
        report.fail("scaled remainders are not bounded")
    return report


def random_nearby_pair(
    rng: np.random.Generator, spread: float = 0.2
) -> tuple[np.ndarray, np.ndarray]:
    """p ~ Dirichlet, q ∝ p·exp(δ) with |δ| ≤ spread, so |log p/q| ≤ 2·spread."""
    k = int(rng.integers(2, 7))
    p = rng.dirichlet(np.full(k, 2.0))
    q = p * np.exp(rng.uniform(-spread, spread, size=k))
    return p, q / q.sum()


def prop2_suite(seed: int, n_pairs: int = 100) -> DiagnosticReport:
    report = DiagnosticReport("prop2")
    rng = numpy_rng(derive_seed(seed, Stream.DIAGNOSTICS, 2))
    held = 0
    for i in range(n_pairs):
        p, q = random_nearby_pair(rng)
        verdict = prop2_variance_check(
            Categorical(probs=torch.as_tensor(p)), Categorical(probs=torch.as_tensor(q))
        )
        if verdict is None:
            report.fail(f"pair {i}: log-ratio outside the ±0.5 band")
        elif verdict:
            held += 1
        else:
            report.fail(f"pair {i}: p={np.round(p, 4).tolist()} q={np.round(q, 4).tolist()}")
    report.add(f"{held}/{n_pairs} pairs satisfy variance inequality")
    return report


def prop3_suite(seed: int, n_cases: int = 20) -> DiagnosticReport:
    report = DiagnosticReport("prop3")
    rng = numpy_rng(derive_seed(seed, Stream.DIAGNOSTICS, 3))
    ratio_met = 0
    for i in range(n_cases):
        mdp = random_discounted_mdp(4, 3, 0.9, rng)
        logits = rng.standard_normal((4, 3))
        old = softmax_policy(logits)
        new = softmax_policy(logits + 0.05 * rng.standard_normal((4, 3)))
        case = improvement_case(mdp, old, new)
        r = case.report
        ratio_met += int(r.ratio_ok)
        report.add(
            f"case {i:2d}: eta_new={case.new_return:.6f} bound={r.bound:.6f} "
            f"ratio_bits={r.ratio_kl_qkl_bits:.4f} tv={r.d_tv:.3e}"
        )
        if not r.pinsker_ok:
            report.fail(f"case {i}: Pinsker's inequality violated")
        if not case.holds:
            report.fail(f"case {i}: return {case.new_return:.6f} below bound {r.bound:.6f}")
    report.add(f"ratio condition met in {ratio_met}/{n_cases} cases")

    # sampled Gaussian policies: reported, not asserted
    gen = torch_generator(derive_seed(seed, Stream.DIAGNOSTICS, 31))
    loc = torch.randn((8, 2), generator=gen, dtype=DTYPE)
    scale = torch.full((8, 2), 0.5, dtype=DTYPE)
    shift = 0.01 * torch.randn((8, 2), generator=gen, dtype=DTYPE)
    gauss = prop3_bound_check(
        Independent(Normal(loc, scale), 1),
        Independent(Normal(loc + shift, scale), 1),
        rng.standard_normal(64),
        gamma=0.98,
        n_samples=20_000,
        seed=seed,
    )
    report.add(
        f"gaussian batch: state {gauss.state_index} ratio_bits={gauss.ratio_kl_qkl_bits:.4f} "
        f"C={gauss.c:.2f} qkl_max_bits={gauss.qkl_max_bits:.3e}"
    )
    return report


def unbiasedness_suite(seed: int, n_policies: int = 5) -> DiagnosticReport:
    report = DiagnosticReport("unbiasedness")
    rng = numpy_rng(derive_seed(seed, Stream.DIAGNOSTICS, 4))
    mdp = two_state_mdp()
    worst = 0.0
    for i in range(n_policies):
        deviations = unbiasedness_deviations(mdp, random_goal_policy(mdp, rng))
        for (g, h), dev in deviations.items():
            worst = max(worst, dev)
            if dev > UNBIASEDNESS_ATOL:
                report.fail(f"policy {i}, goal {g} -> {h}: deviation {dev:.3e}")
    report.add(f"max absolute deviation {worst:.3e} (tolerance {UNBIASEDNESS_ATOL:g})")
    return report


def _perturbed(policy: PolicyNet, scale: float, seed: int) -> PolicyNet:
    gen = torch_generator(seed)
    noise = torch.randn(len(policy.params), generator=gen, dtype=DTYPE)
    return policy.with_params(policy.params + noise * scale)


def _estimator_spread(
    batch: HindsightBatch, new: PolicyNet, rng: np.random.Generator, n_chunks: int = 50
) -> tuple[float, float, float]:
    """Variance of naive and quadratic estimates over random chunks, and naive < 0 share."""
    states = torch.as_tensor(batch.states, dtype=DTYPE)
    actions = torch.as_tensor(batch.actions, dtype=torch.long)
    with torch.no_grad():
        logp_new = new.log_prob(states, actions)
    logp_old = torch.as_tensor(batch.logp_old, dtype=DTYPE)
    weights = torch.as_tensor(batch.w_bar * batch.discount, dtype=DTYPE)
    naive, quad = [], []
    for idx in np.array_split(rng.permutation(len(batch)), n_chunks):
        if idx.size == 0:
            continue
        sel = torch.as_tensor(idx)
        naive.append(float(naive_kl_sample_estimate(logp_old[sel], logp_new[sel], weights[sel])))
        quad.append(float(qkl_sample_estimate(logp_old[sel], logp_new[sel], weights[sel])))
    return float(np.var(naive)), float(np.var(quad)), float(np.mean(np.asarray(naive) < 0.0))


def ess_suite(seed: int, env_id: str = "bitflip:8", batchsize: int = 400) -> DiagnosticReport:
    report = DiagnosticReport("ess")
    config = build_config({"env": env_id, "batchsize": batchsize, "seed": seed})
    env = make_env(env_id, seed=seed)
    base = build_policy(config, env)

    strict = 0
    for trial in range(ESS_TRIALS):
        policy = _perturbed(base, 0.3, derive_seed(seed, Stream.DIAGNOSTICS, 5, trial))
        buffer = collect(policy, env, batchsize, seed=derive_seed(seed, Stream.COLLECT, trial))

        on_policy = ess_report(relabel(buffer, None, env, policy, config.gamma))
        if not np.isclose(on_policy.mean_ess, on_policy.mean_group_size, rtol=1e-12):
            report.fail(
                f"trial {trial}: original goals give ESS {on_policy.mean_ess:.6f} "
                f"!= group size {on_policy.mean_group_size:.6f}"
            )

        goal_sets = build_goal_sets(buffer, env)
        rng = numpy_rng(derive_seed(seed, Stream.GOALS, trial))
        goals = sample_hindsight_goals(goal_sets, config.n_goals, rng, use_hgf=True)
        batch = relabel(buffer, goals, env, policy, config.gamma)
        hindsight = ess_report(batch)
        strict += int(hindsight.mean_ess < hindsight.mean_group_size)

        new = _perturbed(policy, 1e-3, derive_seed(seed, Stream.DIAGNOSTICS, 6, trial))
        var_naive, var_qkl, negative = _estimator_spread(batch, new, rng)
        report.add(
            f"trial {trial:2d}: ess {hindsight.mean_ess:7.3f}"
            f" / group {hindsight.mean_group_size:7.3f}"
            f"  var naive {var_naive:.3e}  var qkl {var_qkl:.3e}  naive<0 {negative:.2f}"
        )

    report.add(f"hindsight ESS below group size in {strict}/{ESS_TRIALS} trials")
    if strict < ESS_STRICT_FRACTION * ESS_TRIALS:
        report.fail(f"ESS strictly below group size in only {strict}/{ESS_TRIALS} trials")
    return report


SUITES: dict[str, Callable[[int], DiagnosticReport]] = {
    "prop1": prop1_suite,
    "prop2": prop2_suite,
    "prop3": prop3_suite,
    "unbiasedness": unbiasedness_suite,
    "ess": ess_suite,
}


def run_diagnostics(suite: str, out_dir: Path, seed: int = 0) -> DiagnosticReport:
    """Run one suite and write its report to ``diag_<suite>.txt`` in *out_dir*."""
    if suite not in SUITES:
        raise ConfigurationError(
            f"unknown diagnostic suite {suite!r}; choose from {sorted(SUITES)}"
        )
    report = SUITES[suite](seed)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = diagnostics_path(out_dir, suite)
    path.write_text(report.render(), encoding="utf-8")
    level = logging.INFO if report.passed else logging.ERROR
    logger.log(level, "diagnostics %s: %s -> %s", suite, "pass" if report.passed else "FAIL", path)
    return report
