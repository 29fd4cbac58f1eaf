"""Bayesian optimization with a GP surrogate.

Bootstraps with a uniform initial design (4 * dim by default), then fits the
surrogate on the archive and maximizes an acquisition function by random
search plus local Gaussian refinement of the best candidates. Batches of
size > 1 draw independent exploration weights per slot (qLCB). Proposals
that collide with an archived point (encoding distance below 1e-9) are
replaced by a uniform random configuration; surrogate failures fall back to
uniform proposals.
"""

from __future__ import annotations

import logging

import numpy as np

from ..errors import GPFitError
from ..objective import Archive, ArchiveEntry
from ..space import Config, SearchSpace, encode_numeric, sample_uniform
from .acquisition import draw_qlcb_kappas, expected_improvement, lcb_utility
from .base import Proposal, Tuner
from .gp import gp_fit

log = logging.getLogger(__name__)

DUPLICATE_EPS = 1e-9


class BOTuner(Tuner):
    name = "bo"

    def __init__(
        self,
        space: SearchSpace,
        seed: int = 0,
        init_design: int | None = None,
        acquisition: str = "ei",
        lcb_kappa: float = 2.0,
        n_candidates: int = 1000,
        refine_top: int = 5,
        refine_steps: int = 20,
        refine_sigma: float = 0.05,
        gp_restarts: int = 10,
    ):
        super().__init__(space, seed)
        self.init_design = int(init_design) if init_design is not None else 4 * space.dim
        self.acquisition = acquisition
        self.lcb_kappa = float(lcb_kappa)
        self.n_candidates = int(n_candidates)
        self.refine_top = int(refine_top)
        self.refine_steps = int(refine_steps)
        self.refine_sigma = float(refine_sigma)
        self.gp_restarts = int(gp_restarts)
        self._prior: list[tuple[Config, float]] = []
        self.last_max_ei: float | None = None
        self.last_fallback = False

    def warm_start(self, prior: Archive, prior_space: SearchSpace) -> None:
        """Prior evaluations join the surrogate's training data."""
        self._check_prior_space(prior_space)
        self._prior = [(e.config, e.score) for e in prior if not e.failed]

    def _training_data(self, archive: Archive):
        pairs = list(self._prior)
        pairs += [(e.config, e.score) for e in archive if not e.failed]
        return pairs

    def _uniform(self, n: int) -> list[Proposal]:
        return [Proposal(sample_uniform(self.space, self.rng)) for _ in range(n)]

    def _perturb(self, cfg: Config) -> Config:
        """Local Gaussian step on active numeric parameters (structure kept)."""
        values = dict(cfg.values)
        for name, v in values.items():
            spec = self.space[name]
            if spec.kind == "real":
                sigma = self.refine_sigma * (spec.upper - spec.lower)
                values[name] = float(np.clip(self.rng.normal(v, sigma), spec.lower, spec.upper))
            elif spec.kind == "integer":
                sigma = self.refine_sigma * (spec.int_upper - spec.int_lower)
                step = int(round(self.rng.normal(0.0, max(sigma, 0.5))))
                values[name] = int(np.clip(v + step, spec.int_lower, spec.int_upper))
        return Config(values)

    def _maximize(self, gp, utility_fn, pool) -> tuple[Config, float]:
        cands, mean, sd = pool
        utils = utility_fn(mean, sd)
        order = np.argsort(-utils, kind="stable")[: self.refine_top]
        best_cfg, best_u = cands[int(order[0])], float(utils[int(order[0])])
        for i in order:
            cur_cfg, cur_u = cands[int(i)], float(utils[int(i)])
            for _ in range(self.refine_steps):
                cand = self._perturb(cur_cfg)
                m, s = gp.predict(encode_numeric(self.space, cand)[None, :])
                u = float(utility_fn(m, s)[0])
                if u > cur_u:
                    cur_cfg, cur_u = cand, u
            if cur_u > best_u:
                best_cfg, best_u = cur_cfg, cur_u
        return best_cfg, best_u

    def propose(self, archive: Archive, n: int) -> list[Proposal]:
        self.last_fallback = False
        pairs = self._training_data(archive)
        if len(pairs) < self.init_design:
            return self._uniform(n)
        try:
            X = np.stack([encode_numeric(self.space, c) for c, _ in pairs])
            y = np.asarray([s for _, s in pairs])
            gp = gp_fit(X, y, rng=self.rng, noise="fit", restarts=self.gp_restarts)
        except GPFitError as exc:
            log.warning("surrogate fit failed (%s); falling back to uniform proposals", exc)
            self.last_fallback = True
            return self._uniform(n)
        c_min = float(np.min(y))

        # one shared random-search pool per iteration: candidates, mean, sd
        cands = [sample_uniform(self.space, self.rng) for _ in range(self.n_candidates)]
        mean, sd = gp.predict(np.stack([encode_numeric(self.space, c) for c in cands]))
        pool = (cands, mean, sd)
        # max EI over the pool doubles as the EI-threshold termination probe
        self.last_max_ei = float(np.max(expected_improvement(mean, sd, c_min)))

        if n == 1 and self.acquisition == "ei":
            utilities = [lambda m, s: expected_improvement(m, s, c_min)]
        elif n == 1 and self.acquisition == "lcb":
            utilities = [lambda m, s: lcb_utility(m, s, self.lcb_kappa)]
        else:
            kappas = draw_qlcb_kappas(n, self.rng)
            utilities = [
                (lambda m, s, k=float(k): lcb_utility(m, s, k)) for k in kappas
            ]

        taken = X.tolist()
        out: list[Proposal] = []
        for utility in utilities:
            cfg, _ = self._maximize(gp, utility, pool)
            z = encode_numeric(self.space, cfg)
            dists = (
                np.linalg.norm(np.asarray(taken) - z[None, :], axis=1)
                if taken
                else np.asarray([np.inf])
            )
            if dists.size and float(np.min(dists)) <= DUPLICATE_EPS:
                cfg = sample_uniform(self.space, self.rng)  # duplicate replacement
                z = encode_numeric(self.space, cfg)
            taken.append(z.tolist())
            out.append(Proposal(cfg))
        return out
