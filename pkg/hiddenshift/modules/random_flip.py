#    hiddenshift - graph structure attack laboratory
#    Licensed under the GNU AGPLv3
#    https://www.gnu.org/licenses/agpl-3.0.html

from .. import loader
from ..baselines import random_attack


class RandomMod(loader.Attack):
    """Flips uniformly chosen node pairs"""

    strings = {"name": "random"}
    needs_surrogate = False

    def attack(self, graph, budget, context):
        return random_attack(graph, budget, context.seed)
