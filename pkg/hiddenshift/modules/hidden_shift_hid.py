#    hiddenshift - graph structure attack laboratory
#    Licensed under the GNU AGPLv3
#    https://www.gnu.org/licenses/agpl-3.0.html

import logging

import numpy as np

from .. import loader
from ..gcn import extract_latent, graph_operator
from ..graph import flip_count
from ..kernels import row_kl
from ..mapping import map_to_structure
from ..semantic import noisy_latent, optimize_alpha

logger = logging.getLogger(__name__)


class HiddenShiftHidMod(loader.Attack):
    """
    Ablation: replaces the class-aware latent shift with Gaussian noise of
    the same divergence, then maps it onto the structure
    """

    strings = {"name": "ahsg-hid"}

    def attack(self, graph, budget, context):
        if not budget.epsilon_flips:
            return loader.AttackResult(np.array(graph.adjacency), self.name, 0)

        h = extract_latent(graph_operator(graph), graph.features, context.surrogate)
        _, h_hat = optimize_alpha(graph, context.surrogate, context.perturb_config)
        target = row_kl(h, h_hat)
        h_noisy, sigma = noisy_latent(h, target, context.seed)

        trace = []
        _, attacked = map_to_structure(
            graph,
            context.surrogate,
            h_noisy,
            context.map_config,
            budget,
            context.seed,
            context.workers,
            trace,
        )
        logger.info(f"{self.name}: noise σ={sigma:.4e} matched KL {target:.4e}")
        return loader.AttackResult(
            attacked,
            self.name,
            flip_count(graph.adjacency, attacked),
            {"loss2": trace, "sigma": sigma, "target_kl": target},
        )
