#    hiddenshift - graph structure attack laboratory
#    Licensed under the GNU AGPLv3
#    https://www.gnu.org/licenses/agpl-3.0.html

from .. import loader
from ..baselines import pgd_ce_attack


class PgdCeMod(loader.Attack):
    """Projected gradient topology attack on the surrogate's cross-entropy"""

    strings = {"name": "pgd-ce"}

    def attack(self, graph, budget, context):
        return pgd_ce_attack(
            graph,
            context.surrogate,
            budget,
            context.map_config,
            context.seed,
            context.workers,
        )
