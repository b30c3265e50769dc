#    hiddenshift - graph structure attack laboratory
#    Licensed under the GNU AGPLv3
#    https://www.gnu.org/licenses/agpl-3.0.html

from .. import loader
from ..baselines import grad_greedy_attack


class GradGreedyMod(loader.Attack):
    """Flips the pairs with the largest first-order loss increase"""

    strings = {"name": "grad-greedy"}

    def attack(self, graph, budget, context):
        return grad_greedy_attack(graph, context.surrogate, budget)
