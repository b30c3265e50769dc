#    hiddenshift - graph structure attack laboratory
#    Licensed under the GNU AGPLv3
#    https://www.gnu.org/licenses/agpl-3.0.html

from .. import loader
from ..mapping import ahsg_attack


class HiddenShiftMod(loader.Attack):
    """
    Shifts the latent representation inside each class, then searches for
    the structure change that reproduces it
    """

    strings = {"name": "ahsg"}

    def attack(self, graph, budget, context):
        return ahsg_attack(
            graph,
            context.surrogate,
            context.perturb_config,
            context.map_config,
            budget,
            context.seed,
            context.workers,
        )
