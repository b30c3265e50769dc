#    hiddenshift - graph structure attack laboratory
#    Licensed under the GNU AGPLv3
#    https://www.gnu.org/licenses/agpl-3.0.html

import logging

import numpy as np

from .. import loader
from ..baselines import random_attack
from ..semantic import optimize_alpha

logger = logging.getLogger(__name__)


class HiddenShiftRecMod(loader.Attack):
    """Ablation: keeps the latent shift but spends the budget on random flips"""

    strings = {"name": "ahsg-rec"}

    def attack(self, graph, budget, context):
        if not budget.epsilon_flips:
            return loader.AttackResult(np.array(graph.adjacency), self.name, 0)

        trace = []
        optimize_alpha(graph, context.surrogate, context.perturb_config, trace)
        result = random_attack(graph, budget, context.seed)
        logger.debug(f"{self.name}: latent target discarded, {result.flips} random flips")
        return loader.AttackResult(result.adjacency, self.name, result.flips, {"loss1": trace})
